#include "aclearn/io.hpp"

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "aclearn/circuit_check.hpp"
#include "aclearn/circuit_io.hpp"
#include "aclearn/errors.hpp"

namespace aclearn {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != ' ' && ch != '\t' && ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string hex32(std::uint32_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << x;
    return os.str();
}

std::uint32_t crc32_of(const void* data, std::size_t size, std::uint32_t crc = 0) {
    const auto* p = static_cast<const Bytef*>(data);
    uLong c = crc;
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        c = ::crc32(c, p, chunk);
        p += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

}  // namespace

Dataset parse_dataset(std::istream& is, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) { throw DataError(source + ":" + std::to_string(lineno) + ": " + msg); };
    std::vector<std::uint32_t> arities;
    while (arities.empty() && std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        for (const auto& f : split_commas(line)) {
            std::uint64_t a = 0;
            try {
                a = parse_uint(f);
            } catch (const DataError&) {
                fail("bad arity '" + f + "'");
            }
            if (a < 2 || a > kMaxArity) fail("arity " + f + " outside [2, " + std::to_string(kMaxArity) + "]");
            arities.push_back(static_cast<std::uint32_t>(a));
        }
    }
    if (arities.empty()) throw DataError(source + ": empty file (expected a line of arities)");
    std::vector<std::uint8_t> cells;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_commas(line);
        if (fields.size() != arities.size())
            fail("expected " + std::to_string(arities.size()) + " values, found " + std::to_string(fields.size()));
        for (std::size_t v = 0; v < fields.size(); ++v) {
            std::uint64_t x = 0;
            try {
                x = parse_uint(fields[v]);
            } catch (const DataError&) {
                fail("bad value '" + fields[v] + "' in column " + std::to_string(v));
            }
            if (x >= arities[v])
                fail("value " + fields[v] + " out of range for column " + std::to_string(v) + " (arity " +
                     std::to_string(arities[v]) + ")");
            cells.push_back(static_cast<std::uint8_t>(x));
        }
    }
    return Dataset(std::move(arities), std::move(cells));
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return parse_dataset(in, path);
}

void write_dataset(std::ostream& os, const Dataset& data) {
    for (std::size_t v = 0; v < data.num_vars(); ++v) os << (v ? "," : "") << data.arity(static_cast<VarId>(v));
    os << '\n';
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto row = data.row(r);
        for (std::size_t v = 0; v < row.size(); ++v) os << (v ? "," : "") << static_cast<unsigned>(row[v]);
        os << '\n';
    }
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ostringstream os;
    write_dataset(os, data);
    write_file_atomic(path, os.str());
}

std::string text_checksum(const std::string& text) { return hex32(crc32_of(text.data(), text.size())); }

std::string dataset_digest(const Dataset& data) {
    std::uint32_t crc = crc32_of(data.arities().data(), data.arities().size() * sizeof(std::uint32_t));
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto row = data.row(r);
        crc = crc32_of(row.data(), row.size(), crc);
    }
    return hex32(crc);
}

void write_bn(std::ostream& os, const BayesianNetwork& bn) {
    os << "bn " << bn.num_vars() << ' ' << to_string(bn.estimator()) << '\n';
    os << "arities";
    for (auto a : bn.arities()) os << ' ' << a;
    os << '\n';
    for (VarId v = 0; v < bn.num_vars(); ++v) {
        const auto& nodes = bn.cpd(v).nodes();
        os << "tree " << v << ' ' << nodes.size() << '\n';
        std::vector<std::uint32_t> stack{0};
        while (!stack.empty()) {
            const auto& t = nodes[stack.back()];
            stack.pop_back();
            if (t.is_leaf()) {
                const auto& leaf = bn.leaf(t.leaf);
                os << "leaf " << t.leaf;
                for (double p : leaf.theta) os << ' ' << format_double(p);
                for (auto c : leaf.counts) os << ' ' << c;
                os << '\n';
            } else {
                os << "interior " << t.split_var << '\n';
                for (auto it = t.children.rbegin(); it != t.children.rend(); ++it) stack.push_back(*it);
            }
        }
    }
}

BayesianNetwork read_bn(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&](const char* what) {
        if (!std::getline(is, line)) throw DataError(std::string("network: missing ") + what);
        ++lineno;
        return tokens(line);
    };
    auto fail = [&](const std::string& msg) {
        throw DataError("network line " + std::to_string(lineno) + ": " + msg);
    };
    auto head = next("header");
    if (head.size() != 3 || head[0] != "bn") fail("bad header");
    const auto n = parse_uint(head[1]);
    const Estimator estimator = parse_estimator(head[2]);
    auto ar = next("arities");
    if (ar.empty() || ar[0] != "arities" || ar.size() != n + 1) fail("bad arity line");
    std::vector<std::uint32_t> arities;
    for (std::size_t k = 1; k < ar.size(); ++k) arities.push_back(static_cast<std::uint32_t>(parse_uint(ar[k])));
    std::vector<std::vector<BayesianNetwork::SerializedNode>> trees(n);
    for (std::uint64_t v = 0; v < n; ++v) {
        auto t = next("tree");
        if (t.size() != 3 || t[0] != "tree" || parse_uint(t[1]) != v) fail("expected 'tree " + std::to_string(v) + " <count>'");
        const auto count = parse_uint(t[2]);
        for (std::uint64_t k = 0; k < count; ++k) {
            auto f = next("tree node");
            BayesianNetwork::SerializedNode sn{TreeNode::kLeaf, {}};
            if (f.size() == 2 && f[0] == "interior") {
                sn.split_var = static_cast<VarId>(parse_uint(f[1]));
            } else if (!f.empty() && f[0] == "leaf" && f.size() == 2 + 2 * static_cast<std::size_t>(arities[v])) {
                sn.leaf.id = static_cast<DistId>(parse_uint(f[1]));
                for (std::uint32_t x = 0; x < arities[v]; ++x) sn.leaf.theta.push_back(parse_double(f[2 + x]));
                for (std::uint32_t x = 0; x < arities[v]; ++x) sn.leaf.counts.push_back(parse_uint(f[2 + arities[v] + x]));
            } else {
                fail("bad tree node");
            }
            trees[v].push_back(std::move(sn));
        }
    }
    return BayesianNetwork::from_trees(std::move(arities), estimator, trees);
}

std::string serialize_model(const Model& model, const RunManifest& manifest) {
    std::ostringstream os;
    os << "aclearn-model " << kModelFormatVersion << '\n';
    os << "[manifest]\n";
    for (const auto& [k, v] : manifest) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw DataError("manifest entries may not contain newlines or '=' in keys");
        os << k << '=' << v << '\n';
    }
    os << "[bn]\n";
    write_bn(os, model.bn);
    os << "[circuit]\n";
    write_circuit(os, model.circuit);
    std::string body = os.str();
    body += "checksum " + hex32(crc32_of(body.data(), body.size())) + "\n";
    return body;
}

ModelBundle deserialize_model(const std::string& text) {
    const auto tail = text.rfind("checksum ");
    if (tail == std::string::npos || (tail != 0 && text[tail - 1] != '\n'))
        throw DataError("model: missing checksum (file truncated?)");
    std::string stored = text.substr(tail + 9);
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
    if (stored != hex32(crc32_of(text.data(), tail))) throw DataError("model: checksum mismatch");

    std::istringstream in(text.substr(0, tail));
    std::string line;
    std::getline(in, line);
    auto head = tokens(line);
    if (head.size() != 2 || head[0] != "aclearn-model") throw DataError("model: not a model file");
    if (head[1] != std::to_string(kModelFormatVersion))
        throw DataError("model: format version " + head[1] + " unsupported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    if (!std::getline(in, line) || line != "[manifest]") throw DataError("model: missing [manifest]");
    ModelBundle b;
    while (std::getline(in, line) && line != "[bn]") {
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("model: bad manifest line '" + line + "'");
        b.manifest[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (line != "[bn]") throw DataError("model: missing [bn]");
    std::string bn_text;
    while (std::getline(in, line) && line != "[circuit]") bn_text += line + '\n';
    if (line != "[circuit]") throw DataError("model: missing [circuit]");
    std::istringstream bn_in(bn_text);
    b.model.bn = read_bn(bn_in);
    b.model.circuit = read_circuit(in);

    const auto& c = b.model.circuit;
    if (c.arities() != b.model.bn.arities()) throw DataError("model: circuit and network disagree on arities");
    for (NodeId id : c.schedule()) {
        const auto& n = c.node(id);
        if (n.kind != NodeKind::Parameter) continue;
        if (n.dist >= b.model.bn.leaf_slots() || !b.model.bn.leaf(n.dist).live ||
            b.model.bn.leaf(n.dist).var != n.var || b.model.bn.leaf(n.dist).theta[n.value] != n.weight)
            throw DataError("model: circuit parameter " + std::to_string(id) + " does not match the network");
    }
    auto report = check_properties(c);
    if (!report.ok()) throw DataError("model: circuit fails structural checks: " + report.describe());
    return b;
}

void write_file_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp + "'");
        out << text;
        out.flush();
        if (!out) throw DataError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void save_model(const std::string& path, const Model& model, const RunManifest& manifest) {
    write_file_atomic(path, serialize_model(model, manifest));
}

ModelBundle load_model(const std::string& path) { return deserialize_model(read_file(path)); }

}  // namespace aclearn
