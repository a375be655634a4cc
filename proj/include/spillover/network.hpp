#pragma once

// Directed spillover network from a connectedness summary and its NPDC matrix,
// with DOT and JSON renderings.
//
// JSON schema:
//   { "threshold": number,
//     "nodes": [ { "id": string, "net": number, "class": "giver"|"receiver"|"neutral",
//                  "size": number >= 0 } ],
//     "edges": [ { "source": string, "target": string, "weight": number > 0,
//                  "bold": bool } ] }

#include "spillover/common.hpp"
#include "spillover/connectedness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace spillover {

struct NetworkNode {
    std::string id;
    double net = 0.0;
    std::string cls;   // giver (NET > 0), receiver (NET < 0), neutral
    double size = 0.0; // |NET|
};

struct NetworkEdge {
    std::size_t source = 0;
    std::size_t target = 0;
    double weight = 0.0;  // |NPDC|
    bool bold = false;
};

struct Network {
    double threshold = 0.0;
    std::vector<NetworkNode> nodes;
    std::vector<NetworkEdge> edges;
};

/// Edge i -> j iff NPDC_{j<-i} > 0, i.e. i transmits more to j than it receives.
/// Edges are ordered by source then target.
inline Network build_network(const ConnectednessSummary& s, const Matrix& npdc_matrix,
                             const std::vector<std::string>& ids, double bold_threshold) {
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (s.net.size() != n || npdc_matrix.rows() != n || npdc_matrix.cols() != n)
        throw InvalidInput("network inputs disagree on the number of series");
    if (!(bold_threshold >= 0.0)) throw InvalidInput("bold threshold must be non-negative");
    Network g;
    g.threshold = bold_threshold;
    for (Eigen::Index i = 0; i < n; ++i) {
        NetworkNode node;
        node.id = ids[static_cast<std::size_t>(i)];
        node.net = s.net(i);
        node.cls = node.net > 0.0 ? "giver" : node.net < 0.0 ? "receiver" : "neutral";
        node.size = std::abs(node.net);
        g.nodes.push_back(std::move(node));
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = npdc_matrix(j, i);
            if (i == j || !(w > 0.0)) continue;
            g.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), w, w > bold_threshold});
        }
    return g;
}

namespace detail {

inline std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string fmt_num(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace detail

inline std::string to_dot(const Network& g, const std::string& name = "spillover") {
    double max_size = 0.0;
    for (const auto& n : g.nodes) max_size = std::max(max_size, n.size);
    std::string out = "digraph " + detail::dot_quote(name) + " {\n";
    out += "  graph [rankdir=LR];\n";
    out += "  node [shape=circle, style=filled];\n";
    for (const auto& n : g.nodes) {
        const char* color = n.cls == "giver" ? "lightblue" : n.cls == "receiver" ? "gold" : "white";
        const double width = max_size > 0.0 ? 0.4 + 1.6 * n.size / max_size : 0.4;
        out += "  " + detail::dot_quote(n.id) + " [class=" + detail::dot_quote(n.cls) + ", fillcolor=" + color +
               ", net=" + detail::fmt_num(n.net) + ", width=" + detail::fmt_num(width, "%.4f") + "];\n";
    }
    for (const auto& e : g.edges) {
        out += "  " + detail::dot_quote(g.nodes[e.source].id) + " -> " + detail::dot_quote(g.nodes[e.target].id) +
               " [weight=" + detail::fmt_num(e.weight) + ", penwidth=" + (e.bold ? "3" : "1") +
               ", style=" + (e.bold ? "bold" : "solid") + "];\n";
    }
    out += "}\n";
    return out;
}

inline nlohmann::ordered_json to_json(const Network& g) {
    nlohmann::ordered_json j;
    j["threshold"] = g.threshold;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes)
        j["nodes"].push_back({{"id", n.id}, {"net", n.net}, {"class", n.cls}, {"size", n.size}});
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back({{"source", g.nodes[e.source].id},
                              {"target", g.nodes[e.target].id},
                              {"weight", e.weight},
                              {"bold", e.bold}});
    return j;
}

/// Checks a parsed network document against the schema above. Returns an
/// empty string when valid, otherwise the first violation.
inline std::string validate_network_json(const nlohmann::json& j) {
    if (!j.is_object()) return "document is not an object";
    if (!j.contains("threshold") || !j["threshold"].is_number()) return "missing numeric threshold";
    if (!j.contains("nodes") || !j["nodes"].is_array()) return "missing nodes array";
    if (!j.contains("edges") || !j["edges"].is_array()) return "missing edges array";
    std::vector<std::string> ids;
    for (const auto& n : j["nodes"]) {
        if (!n.is_object() || !n.contains("id") || !n["id"].is_string()) return "node without string id";
        if (!n.contains("net") || !n["net"].is_number()) return "node without numeric net";
        if (!n.contains("size") || !n["size"].is_number() || n["size"].get<double>() < 0.0) return "node size invalid";
        if (!n.contains("class") || !n["class"].is_string()) return "node without class";
        const auto cls = n["class"].get<std::string>();
        if (cls != "giver" && cls != "receiver" && cls != "neutral") return "unknown node class " + cls;
        ids.push_back(n["id"].get<std::string>());
    }
    auto known = [&](const nlohmann::json& v) {
        return v.is_string() && std::find(ids.begin(), ids.end(), v.get<std::string>()) != ids.end();
    };
    for (const auto& e : j["edges"]) {
        if (!e.is_object()) return "edge is not an object";
        if (!e.contains("source") || !known(e["source"])) return "edge source is not a node";
        if (!e.contains("target") || !known(e["target"])) return "edge target is not a node";
        if (!e.contains("weight") || !e["weight"].is_number() || !(e["weight"].get<double>() > 0.0))
            return "edge weight must be positive";
        if (!e.contains("bold") || !e["bold"].is_boolean()) return "edge without bold flag";
    }
    return {};
}

}  // namespace spillover
