#include "aclearn/circuit_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "aclearn/errors.hpp"

namespace aclearn {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
    double x = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), x);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw DataError("malformed number '" + token + "'");
    return x;
}

std::uint64_t parse_uint(const std::string& token) {
    std::uint64_t x = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), x);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw DataError("malformed integer '" + token + "'");
    return x;
}

void write_circuit(std::ostream& os, const ArithmeticCircuit& circuit) {
    std::vector<NodeId> renumber(circuit.arena_size(), kNoNode);
    std::vector<NodeId> out;
    for (VarId v = 0; v < circuit.num_vars(); ++v)
        for (ValueIndex i = 0; i < circuit.arities()[v]; ++i) {
            NodeId id = circuit.indicator(v, i);
            renumber[id] = static_cast<NodeId>(out.size());
            out.push_back(id);
        }
    for (NodeId id : circuit.schedule()) {
        if (circuit.node(id).kind == NodeKind::Indicator) continue;
        renumber[id] = static_cast<NodeId>(out.size());
        out.push_back(id);
    }

    os << "circuit " << out.size() << ' ' << renumber[circuit.root()] << ' ' << circuit.num_vars();
    for (auto a : circuit.arities()) os << ' ' << a;
    os << '\n';
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto& n = circuit.node(out[k]);
        os << k;
        switch (n.kind) {
            case NodeKind::Indicator: os << " v " << n.var << ' ' << n.value; break;
            case NodeKind::Parameter:
                os << " p " << n.dist << ' ' << n.value << ' ' << format_double(n.weight) << ' ' << n.var;
                break;
            case NodeKind::Sum: os << " +"; break;
            case NodeKind::Product: os << " *"; break;
        }
        for (NodeId c : n.children) os << ' ' << renumber[c];
        os << '\n';
    }
}

ArithmeticCircuit read_circuit(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("circuit: missing header");
    std::istringstream header(line);
    std::string tag, tok;
    header >> tag;
    if (tag != "circuit") throw DataError("circuit: bad header '" + line + "'");
    std::uint64_t count = 0, root = 0, nvars = 0;
    if (!(header >> tok)) throw DataError("circuit: truncated header");
    count = parse_uint(tok);
    if (!(header >> tok)) throw DataError("circuit: truncated header");
    root = parse_uint(tok);
    if (!(header >> tok)) throw DataError("circuit: truncated header");
    nvars = parse_uint(tok);
    std::vector<std::uint32_t> arities;
    for (std::uint64_t v = 0; v < nvars; ++v) {
        if (!(header >> tok)) throw DataError("circuit: truncated arity list");
        arities.push_back(static_cast<std::uint32_t>(parse_uint(tok)));
    }
    ArithmeticCircuit c(arities);

    for (std::uint64_t k = 0; k < count; ++k) {
        if (!std::getline(is, line)) throw DataError("circuit: expected " + std::to_string(count) + " nodes");
        std::istringstream ls(line);
        std::vector<std::string> f;
        while (ls >> tok) f.push_back(tok);
        const std::string where = "circuit line " + std::to_string(k + 2) + ": ";
        if (f.size() < 2 || parse_uint(f[0]) != k) throw DataError(where + "bad node id");
        if (f[1] == "v") {
            if (f.size() != 4) throw DataError(where + "bad indicator");
            auto var = static_cast<VarId>(parse_uint(f[2]));
            auto val = static_cast<ValueIndex>(parse_uint(f[3]));
            if (c.indicator(var, val) != k) throw DataError(where + "indicators out of order");
        } else if (f[1] == "p") {
            if (f.size() != 6) throw DataError(where + "bad parameter");
            NodeId id = c.add_parameter(static_cast<VarId>(parse_uint(f[5])), static_cast<DistId>(parse_uint(f[2])),
                                        static_cast<ValueIndex>(parse_uint(f[3])), parse_double(f[4]));
            if (id != k) throw DataError(where + "node id mismatch");
        } else if (f[1] == "+" || f[1] == "*") {
            std::vector<NodeId> children;
            for (std::size_t j = 2; j < f.size(); ++j) {
                auto ch = parse_uint(f[j]);
                if (ch >= k) throw DataError(where + "child id not before parent");
                children.push_back(static_cast<NodeId>(ch));
            }
            if (children.empty()) throw DataError(where + "interior node without children");
            NodeId id = f[1] == "+" ? c.add_sum(std::move(children)) : c.add_product(std::move(children));
            if (id != k) throw DataError(where + "node id mismatch");
        } else {
            throw DataError(where + "unknown node kind '" + f[1] + "'");
        }
    }
    if (root >= count) throw DataError("circuit: root out of range");
    c.set_root(static_cast<NodeId>(root));
    c.garbage_collect();
    return c;
}

}  // namespace aclearn
