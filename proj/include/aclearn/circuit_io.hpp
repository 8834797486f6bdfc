#ifndef ACLEARN_CIRCUIT_IO_HPP
#define ACLEARN_CIRCUIT_IO_HPP

#include <iosfwd>
#include <string>

#include "aclearn/circuit.hpp"

namespace aclearn {

// Text form, one node per line after a header:
//
//   circuit <node-count> <root> <num-vars> <arity>...
//   <id> v <var> <value>
//   <id> p <leaf> <value> <weight> <var>
//   <id> + <child>...
//   <id> * <child>...
//
// Nodes are renumbered on save: indicators first in (var, value) order, then
// the remaining reachable nodes children-first. Weights use the shortest
// representation that round-trips.
void write_circuit(std::ostream& os, const ArithmeticCircuit& circuit);
ArithmeticCircuit read_circuit(std::istream& is);

std::string format_double(double x);
double parse_double(const std::string& token);
std::uint64_t parse_uint(const std::string& token);

}  // namespace aclearn

#endif  // ACLEARN_CIRCUIT_IO_HPP
