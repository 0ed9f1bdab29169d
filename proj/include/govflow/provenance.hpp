#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "govflow/dsl.hpp"
#include "govflow/flow.hpp"
#include "govflow/model.hpp"

namespace govflow {

/// Name of the synthetic input port that carries imported rules into an
/// initial component.
inline constexpr const char* kImportPort = "__import__";

/// Function label assigned to injected publish components.
inline constexpr const char* kPublishFunction = ":Publish";

// ============================================================================
// Graph types
// ============================================================================

struct Component {
    std::string id;
    std::string function;
    std::vector<std::string> input_ports;
    std::vector<std::string> output_ports;
    FlowRule flow_rule;                          // default when unspecified
    std::optional<std::string> flow_rule_text;   // original DSL text, if any
    bool is_virtual = false;

    auto operator<=>(const Component&) const = default;
};

struct PortEndpoint {
    std::string component;
    std::string port;

    auto operator<=>(const PortEndpoint&) const = default;
};

/// One edge of the data flow: an output port feeding an input port. Input
/// ports take at most one incoming connection; outputs may fan out.
struct Connection {
    PortEndpoint from;
    PortEndpoint to;

    auto operator<=>(const Connection&) const = default;
};

struct DataFlowGraph {
    std::string session_id;
    std::string agent;
    std::vector<Component> components;
    std::vector<Connection> connections;

    auto operator<=>(const DataFlowGraph&) const = default;

    const Component* find_component(const std::string& id) const {
        for (const auto& c : components) {
            if (c.id == id) return &c;
        }
        return nullptr;
    }
};

/// Data-rule source text per initial component. Values are rule text, not
/// paths; path resolution happens when the manifest document is loaded.
struct ImportManifest {
    std::map<std::string, std::string> entries;
};

// ============================================================================
// Loading
// ============================================================================

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(std::string("provenance: missing field '") + key + "' in " + where);
    }
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key,
                                  const std::string& where) {
    const auto& v = require_field(obj, key, where);
    if (!v.is_string()) {
        throw Error(std::string("provenance: field '") + key + "' in " + where +
                    " must be a string");
    }
    return v.get<std::string>();
}

inline std::vector<std::string> require_string_array(const nlohmann::json& obj, const char* key,
                                                     const std::string& where) {
    const auto& v = require_field(obj, key, where);
    if (!v.is_array()) {
        throw Error(std::string("provenance: field '") + key + "' in " + where +
                    " must be an array");
    }
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) {
            throw Error(std::string("provenance: field '") + key + "' in " + where +
                        " must contain only strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

inline PortEndpoint parse_endpoint(const nlohmann::json& v, const char* key) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_string() || !v[1].is_string()) {
        throw Error(std::string("provenance: connection '") + key +
                    "' must be [componentId, port]");
    }
    return {v[0].get<std::string>(), v[1].get<std::string>()};
}

inline void check_flow_rule_ports(const Component& c) {
    std::set<std::string> ins(c.input_ports.begin(), c.input_ports.end());
    ins.insert(kImportPort);
    std::set<std::string> outs(c.output_ports.begin(), c.output_ports.end());
    if (!c.flow_rule.mapping.is_default) {
        for (const auto& [in, out] : c.flow_rule.mapping.pairs) {
            if (!ins.count(in)) {
                throw Error("component '" + c.id + "': flow rule maps undeclared input port '" +
                            in + "'");
            }
            if (!outs.count(out)) {
                throw Error("component '" + c.id + "': flow rule maps undeclared output port '" +
                            out + "'");
            }
        }
    }
    for (const auto& r : c.flow_rule.refinements) {
        if (!outs.count(r.at_output)) {
            throw Error("component '" + c.id + "': refinement targets undeclared output port '" +
                        r.at_output + "'");
        }
        if (r.from_input && !ins.count(*r.from_input)) {
            throw Error("component '" + c.id + "': refinement names undeclared input port '" +
                        *r.from_input + "'");
        }
    }
}

inline void check_acyclic_and_connected(const DataFlowGraph& g) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.components.size(); ++i) index[g.components[i].id] = i;
    std::vector<std::vector<std::size_t>> succ(g.components.size());
    std::vector<std::size_t> indegree(g.components.size(), 0);
    std::vector<std::vector<std::size_t>> undirected(g.components.size());
    for (const auto& conn : g.connections) {
        std::size_t a = index.at(conn.from.component);
        std::size_t b = index.at(conn.to.component);
        succ[a].push_back(b);
        ++indegree[b];
        undirected[a].push_back(b);
        undirected[b].push_back(a);
    }
    // Kahn's algorithm; leftovers mean a cycle.
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < indegree.size(); ++i) {
        if (indegree[i] == 0) ready.push_back(i);
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        std::size_t n = ready.back();
        ready.pop_back();
        ++seen;
        for (std::size_t m : succ[n]) {
            if (--indegree[m] == 0) ready.push_back(m);
        }
    }
    if (seen != g.components.size()) {
        throw Error("provenance: cycle detected in data-flow graph");
    }
    if (!g.components.empty()) {
        std::vector<bool> visited(g.components.size(), false);
        std::vector<std::size_t> stack{0};
        visited[0] = true;
        std::size_t reached = 1;
        while (!stack.empty()) {
            std::size_t n = stack.back();
            stack.pop_back();
            for (std::size_t m : undirected[n]) {
                if (!visited[m]) {
                    visited[m] = true;
                    ++reached;
                    stack.push_back(m);
                }
            }
        }
        if (reached != g.components.size()) {
            throw Error("provenance: data-flow graph is not connected");
        }
    }
}

}  // namespace detail

/// Loads and validates a provenance document. Rejects duplicate ids,
/// duplicate port names, zero-output components, dangling or doubled
/// connection endpoints, cycles, and disconnected graphs. Flow-rule texts are
/// parsed and their port references checked against the owning component.
inline DataFlowGraph load_provenance(const std::string& document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("provenance: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error("provenance: document must be a JSON object");

    DataFlowGraph g;
    const auto& session = detail::require_field(doc, "session", "document");
    g.session_id = detail::require_string(session, "id", "session");
    g.agent = detail::require_string(session, "agent", "session");

    const auto& components = detail::require_field(doc, "components", "document");
    if (!components.is_array() || components.empty()) {
        throw Error("provenance: 'components' must be a non-empty array");
    }
    std::set<std::string> ids;
    for (const auto& entry : components) {
        Component c;
        c.id = detail::require_string(entry, "id", "component");
        if (!ids.insert(c.id).second) {
            throw Error("provenance: duplicate component id '" + c.id + "'");
        }
        c.function = detail::require_string(entry, "function", "component");
        c.input_ports = detail::require_string_array(entry, "inputs", "component '" + c.id + "'");
        c.output_ports =
            detail::require_string_array(entry, "outputs", "component '" + c.id + "'");
        std::set<std::string> ports;
        for (const auto& p : c.input_ports) {
            if (!ports.insert(p).second) {
                throw Error("provenance: component '" + c.id + "' repeats port name '" + p + "'");
            }
        }
        for (const auto& p : c.output_ports) {
            if (!ports.insert(p).second) {
                throw Error("provenance: component '" + c.id + "' repeats port name '" + p + "'");
            }
        }
        if (c.output_ports.empty()) {
            throw Error("provenance: component '" + c.id + "' declares no output ports");
        }
        if (auto it = entry.find("flow_rule"); it != entry.end()) {
            if (!it->is_string()) {
                throw Error("provenance: component '" + c.id + "': 'flow_rule' must be a string");
            }
            std::string text = it->get<std::string>();
            auto parsed = parse_flow_rules(text);
            if (!parsed.ok()) {
                const auto& d = parsed.diagnostics.front();
                throw Error("component '" + c.id + "': flow rule line " +
                            std::to_string(d.span.line) + ":" + std::to_string(d.span.column) +
                            ": " + d.message);
            }
            c.flow_rule = *parsed.value;
            c.flow_rule_text = std::move(text);
        }
        detail::check_flow_rule_ports(c);
        g.components.push_back(std::move(c));
    }

    const auto& connections = detail::require_field(doc, "connections", "document");
    if (!connections.is_array()) throw Error("provenance: 'connections' must be an array");
    std::set<std::pair<std::string, std::string>> fed_inputs;
    for (const auto& entry : connections) {
        Connection conn;
        conn.from = detail::parse_endpoint(detail::require_field(entry, "from", "connection"),
                                           "from");
        conn.to = detail::parse_endpoint(detail::require_field(entry, "to", "connection"), "to");
        const Component* src = g.find_component(conn.from.component);
        const Component* dst = g.find_component(conn.to.component);
        if (!src) {
            throw Error("provenance: connection from unknown component '" + conn.from.component +
                        "'");
        }
        if (!dst) {
            throw Error("provenance: connection to unknown component '" + conn.to.component +
                        "'");
        }
        if (std::find(src->output_ports.begin(), src->output_ports.end(), conn.from.port) ==
            src->output_ports.end()) {
            throw Error("provenance: connection from undeclared output port '" +
                        conn.from.component + "." + conn.from.port + "'");
        }
        if (std::find(dst->input_ports.begin(), dst->input_ports.end(), conn.to.port) ==
            dst->input_ports.end()) {
            throw Error("provenance: connection to undeclared input port '" + conn.to.component +
                        "." + conn.to.port + "'");
        }
        if (!fed_inputs.insert({conn.to.component, conn.to.port}).second) {
            throw Error("provenance: input port '" + conn.to.component + "." + conn.to.port +
                        "' has more than one incoming connection");
        }
        g.connections.push_back(std::move(conn));
    }

    detail::check_acyclic_and_connected(g);
    return g;
}

/// Re-emits the provenance JSON for a loaded graph. Flow rules are written
/// back verbatim from their original text.
inline std::string serialize_provenance(const DataFlowGraph& g) {
    nlohmann::ordered_json doc;
    doc["session"] = {{"id", g.session_id}, {"agent", g.agent}};
    doc["components"] = nlohmann::ordered_json::array();
    for (const auto& c : g.components) {
        nlohmann::ordered_json entry;
        entry["id"] = c.id;
        entry["function"] = c.function;
        entry["inputs"] = c.input_ports;
        entry["outputs"] = c.output_ports;
        if (c.flow_rule_text) entry["flow_rule"] = *c.flow_rule_text;
        doc["components"].push_back(std::move(entry));
    }
    doc["connections"] = nlohmann::ordered_json::array();
    for (const auto& conn : g.connections) {
        doc["connections"].push_back(
            {{"from", {conn.from.component, conn.from.port}},
             {"to", {conn.to.component, conn.to.port}}});
    }
    return doc.dump(2) + "\n";
}

// ============================================================================
// Initial components and imports
// ============================================================================

/// Components with no incoming connection, in id order. These are the entry
/// points that receive imported rules on the synthetic import port.
inline std::vector<std::string> initial_components(const DataFlowGraph& g) {
    std::set<std::string> fed;
    for (const auto& conn : g.connections) fed.insert(conn.to.component);
    std::vector<std::string> out;
    for (const auto& c : g.components) {
        if (!fed.count(c.id)) out.push_back(c.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Loads an import manifest document: {"imports": {componentId: rules}}. A
/// value ending in ".datarule" is read as a file path relative to base_dir;
/// anything else is taken as inline rule text.
inline ImportManifest load_import_manifest(const std::string& document,
                                           const std::function<std::string(const std::string&)>&
                                               read_file) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("imports: invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("imports") || !doc["imports"].is_object()) {
        throw Error("imports: document must be {\"imports\": {componentId: rules}}");
    }
    ImportManifest manifest;
    for (const auto& [cid, value] : doc["imports"].items()) {
        if (!value.is_string()) {
            throw Error("imports: entry for '" + cid + "' must be a string");
        }
        std::string text = value.get<std::string>();
        if (text.size() >= 9 && text.substr(text.size() - 9) == ".datarule") {
            text = read_file(text);
        }
        manifest.entries[cid] = std::move(text);
    }
    return manifest;
}

/// Parses each manifest entry and assigns the resulting ruleset to its
/// initial component; initial components absent from the manifest get an
/// empty ruleset. Manifest keys naming non-initial components are an error.
inline std::map<std::string, RuleSet> recognize_imports(
    const DataFlowGraph& g, const ImportManifest& manifest,
    std::vector<std::string>* warnings = nullptr) {
    auto inits = initial_components(g);
    std::set<std::string> init_set(inits.begin(), inits.end());
    std::map<std::string, RuleSet> imports;
    for (const auto& [cid, text] : manifest.entries) {
        if (!init_set.count(cid)) {
            throw Error("import manifest targets non-initial component '" + cid + "'");
        }
        auto parsed = parse_data_rules(text);
        if (!parsed.ok()) {
            const auto& d = parsed.diagnostics.front();
            throw Error("import rules for '" + cid + "': line " + std::to_string(d.span.line) +
                        ":" + std::to_string(d.span.column) + ": " + d.message);
        }
        if (warnings) {
            for (const auto& d : parsed.diagnostics) {
                warnings->push_back("import rules for '" + cid + "': " + d.message);
            }
        }
        imports[cid] = *parsed.value;
    }
    for (const auto& cid : inits) {
        imports.try_emplace(cid, RuleSet{});
    }
    return imports;
}

// ============================================================================
// Virtual publish components
// ============================================================================

/// Appends one virtual publish component downstream of each output port of
/// every component whose function is listed. The returned graph is a copy;
/// the input graph is left untouched.
inline DataFlowGraph inject_virtual_components(const DataFlowGraph& g,
                                               const std::set<std::string>& publish_functions) {
    DataFlowGraph out = g;
    std::set<std::string> ids;
    for (const auto& c : g.components) ids.insert(c.id);
    for (const auto& c : g.components) {
        if (!publish_functions.count(c.function)) continue;
        for (const auto& port : c.output_ports) {
            Component virt;
            virt.id = c.id + "__publish__" + port;
            if (!ids.insert(virt.id).second) {
                throw Error("virtual component id '" + virt.id + "' collides with existing id");
            }
            virt.function = kPublishFunction;
            virt.input_ports = {"in"};
            virt.output_ports = {"out"};
            virt.is_virtual = true;
            out.components.push_back(std::move(virt));
            out.connections.push_back({{c.id, port}, {c.id + "__publish__" + port, "in"}});
        }
    }
    return out;
}

}  // namespace govflow
