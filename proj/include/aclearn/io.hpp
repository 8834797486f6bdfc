#ifndef ACLEARN_IO_HPP
#define ACLEARN_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "aclearn/bn.hpp"
#include "aclearn/dataset.hpp"
#include "aclearn/model.hpp"

namespace aclearn {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kModelFormatVersion = 1;

// First line: comma-separated arities. Each further line: one row of
// comma-separated value indices. Blank lines are skipped. Errors name the
// source and line.
Dataset parse_dataset(std::istream& is, const std::string& source = "<input>");
Dataset load_dataset(const std::string& path);
void write_dataset(std::ostream& os, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

// CRC-32 of a string, as 8 hex digits.
std::string text_checksum(const std::string& text);

// CRC-32 over the arities and cells, as 8 hex digits.
std::string dataset_digest(const Dataset& data);

// Network text form:
//
//   bn <num-vars> <estimator>
//   arities <a_0> ... <a_{n-1}>
//   tree <var> <node-count>
//   interior <split-var>
//   leaf <id> <theta_0> ... <theta_{k-1}> <count_0> ... <count_{k-1}>
//
// Tree nodes are listed in preorder with children in value order.
void write_bn(std::ostream& os, const BayesianNetwork& bn);
BayesianNetwork read_bn(std::istream& is);

// Key/value echo of how a model was produced. Wall times are kept out so
// that identical runs produce identical bundles.
using RunManifest = std::map<std::string, std::string>;

struct ModelBundle {
    Model model;
    RunManifest manifest;
};

// Single text file:
//
//   aclearn-model <format-version>
//   [manifest]      key=value lines, sorted
//   [bn]            network text form
//   [circuit]       circuit text form
//   checksum <crc32 of every preceding byte, 8 hex digits>
std::string serialize_model(const Model& model, const RunManifest& manifest);
// Throws DataError on a version mismatch, checksum failure, malformed
// sections, or a circuit that disagrees with the network.
ModelBundle deserialize_model(const std::string& text);
// Writes through a temporary file and rename.
void save_model(const std::string& path, const Model& model, const RunManifest& manifest);
ModelBundle load_model(const std::string& path);

// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

}  // namespace aclearn

#endif  // ACLEARN_IO_HPP
