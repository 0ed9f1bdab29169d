#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "govflow/dsl.hpp"
#include "govflow/flow.hpp"
#include "govflow/model.hpp"
#include "govflow/provenance.hpp"

namespace govflow {

// ============================================================================
// Session state
// ============================================================================

struct PostCheck {
    std::string component_id;
    std::string port;
    ObligationDefinition obligation;

    auto operator<=>(const PostCheck&) const = default;
};

/// Everything the reasoning pass produces for one session: per-output-port
/// ruleset annotations, the activation list in firing order, warnings with
/// their location, and the terminal-port flags for never-activating rules.
struct SessionState {
    DataFlowGraph graph;
    std::map<std::pair<std::string, std::string>, RuleSet> port_annotations;
    std::vector<ActivatedObligation> activated;
    std::vector<std::pair<std::string, std::string>> warnings;  // (location, message)
    std::vector<PostCheck> post_checks;
};

/// Where an obligation's activation condition is being evaluated.
struct EvaluationContext {
    Component component;
    bool is_initial = false;
    bool is_publish_virtual = false;
    bool on_import_port = false;  // rule arrived via the synthetic import port
    std::string agent;
    std::string session_id;
};

// ============================================================================
// Traversal
// ============================================================================

/// Deterministic topological order: a component appears after everything
/// feeding it, with in-degree ties broken by id.
inline std::vector<std::string> topo_order(const DataFlowGraph& g) {
    std::map<std::string, std::set<std::string>> succ;
    std::map<std::string, int> indegree;
    for (const auto& c : g.components) indegree[c.id] = 0;
    for (const auto& conn : g.connections) {
        if (succ[conn.from.component].insert(conn.to.component).second) {
            ++indegree[conn.to.component];
        }
    }
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [id, deg] : indegree) {
        if (deg == 0) ready.push(id);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        std::string id = ready.top();
        ready.pop();
        order.push_back(id);
        for (const auto& next : succ[id]) {
            if (--indegree[next] == 0) ready.push(next);
        }
    }
    if (order.size() != g.components.size()) {
        throw Error("topological sort: cycle in data-flow graph");
    }
    return order;
}

// ============================================================================
// Activation
// ============================================================================

/// Evaluates an activation condition in context. Import rules fire OnImport
/// only where they were imported; OnAsInput fires on arrival at a real input
/// port of a real component; OnPublish fires at injected publish components.
inline bool check_activation(const ActivationCondition& cond, const EvaluationContext& ctx) {
    bool triggered = false;
    switch (cond.trigger) {
        case Trigger::never: return false;
        case Trigger::on_import:
            triggered = ctx.is_initial && ctx.on_import_port;
            break;
        case Trigger::on_as_input:
            triggered = !ctx.on_import_port && !ctx.component.is_virtual;
            break;
        case Trigger::on_publish:
            triggered = ctx.is_publish_virtual;
            break;
    }
    if (triggered && cond.subject_filter) triggered = ctx.agent == *cond.subject_filter;
    return triggered;
}

/// Freezes an activated obligation: argument references are dereferenced
/// against the carrying ruleset now, so later refinements cannot alter the
/// record. Unresolvable arguments become absent values plus a warning.
inline std::pair<ActivatedObligation, std::vector<std::string>> instantiate(
    const ObligationDefinition& ob, const RuleSet& rs, const EvaluationContext& ctx,
    std::uint64_t sequence) {
    ActivatedObligation record;
    record.action_class = ob.action_class;
    record.subject = ctx.agent;
    record.component_id = ctx.component.id;
    record.session_id = ctx.session_id;
    record.sequence = sequence;
    std::vector<std::string> warnings;
    for (const auto& ref : ob.action_args) {
        if (const ValueStruct* v = resolve_ref(rs.attributes, ref)) {
            record.resolved_args.push_back(*v);
        } else {
            record.resolved_args.push_back(std::nullopt);
            warnings.push_back("obligation " + ob.action_class.text + ": argument " +
                               serialize_attr_ref(ref) + " did not resolve at activation");
        }
    }
    return {std::move(record), std::move(warnings)};
}

// ============================================================================
// Session reasoning
// ============================================================================

namespace detail {

/// Output ports that end the data flow: no outgoing connection, ignoring
/// injected publish consumers so injection does not move the terminals.
inline bool is_terminal_output(const DataFlowGraph& g, const std::string& cid,
                               const std::string& port) {
    for (const auto& conn : g.connections) {
        if (conn.from.component != cid || conn.from.port != port) continue;
        const Component* consumer = g.find_component(conn.to.component);
        if (consumer && !consumer->is_virtual) return false;
    }
    return true;
}

}  // namespace detail

/// Runs the full reasoning pass: walks the graph in topological order, and
/// per component gathers input rulesets from upstream annotations (plus the
/// imported ruleset on the synthetic import port), checks every obligation's
/// activation condition, then propagates rules to the output-port
/// annotations. A final pass flags never-activating obligations sitting on
/// terminal output ports.
inline SessionState reason_session(const DataFlowGraph& g,
                                   const std::map<std::string, RuleSet>& imports) {
    SessionState state;
    state.graph = g;

    auto inits = initial_components(g);
    std::set<std::string> init_set(inits.begin(), inits.end());
    for (const auto& [cid, rs] : imports) {
        (void)rs;
        if (!init_set.count(cid)) {
            throw Error("imports target non-initial component '" + cid + "'");
        }
    }

    std::map<std::pair<std::string, std::string>, PortEndpoint> upstream;
    for (const auto& conn : g.connections) {
        upstream[{conn.to.component, conn.to.port}] = conn.from;
    }

    std::uint64_t sequence = 0;
    for (const auto& cid : topo_order(g)) {
        const Component& c = *g.find_component(cid);

        PortedRuleSets inputs;
        if (auto it = imports.find(cid); it != imports.end()) {
            inputs.push_back({kImportPort, it->second});
        }
        for (const auto& port : c.input_ports) {
            auto up = upstream.find({cid, port});
            if (up == upstream.end()) continue;  // declared but unconnected
            inputs.push_back(
                {port, state.port_annotations.at({up->second.component, up->second.port})});
        }

        EvaluationContext ctx;
        ctx.component = c;
        ctx.is_initial = init_set.count(cid) > 0;
        ctx.is_publish_virtual = c.is_virtual && c.function == kPublishFunction;
        ctx.agent = g.agent;
        ctx.session_id = g.session_id;

        // One activation per (component, obligation) pair even when the same
        // obligation arrives on several input ports.
        std::set<ObligationDefinition> fired;
        for (const auto& [port, rs] : inputs) {
            ctx.on_import_port = port == kImportPort;
            for (const auto& ob : rs.obligations) {
                if (!check_activation(ob.condition, ctx)) continue;
                if (!fired.insert(ob).second) continue;
                auto [record, warnings] = instantiate(ob, rs, ctx, sequence);
                ++sequence;
                state.activated.push_back(std::move(record));
                for (const auto& w : warnings) {
                    state.warnings.push_back({cid + "." + port, w});
                }
            }
        }

        for (auto& [port, result] : propagate(c.flow_rule, inputs, c.output_ports)) {
            for (const auto& w : result.warnings) {
                state.warnings.push_back({cid + "." + port, w});
            }
            state.port_annotations[{cid, port}] = std::move(result.ruleset);
        }
    }

    for (const auto& c : g.components) {
        if (c.is_virtual) continue;
        for (const auto& port : c.output_ports) {
            if (!detail::is_terminal_output(g, c.id, port)) continue;
            const RuleSet& rs = state.port_annotations.at({c.id, port});
            for (const auto& ob : rs.obligations) {
                if (ob.condition.trigger == Trigger::never) {
                    state.post_checks.push_back({c.id, port, ob});
                }
            }
        }
    }
    return state;
}

// ============================================================================
// Reporting
// ============================================================================

struct ReportDocument {
    nlohmann::ordered_json json;
    std::string dot;
};

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\l";
            continue;
        }
        out.push_back(c);
    }
    return out;
}

inline std::string dot_render(const SessionState& s, const std::map<std::string, RuleSet>& imports) {
    std::string dot;
    dot += "digraph session {\n";
    dot += "  rankdir=LR;\n";
    dot += "  label=\"session " + dot_escape(s.graph.session_id) + "\";\n";
    for (const auto& c : s.graph.components) {
        const char* port_shape = c.is_virtual ? "egg" : "ellipse";
        dot += "  \"c:" + c.id + "\" [shape=box, style=filled, fillcolor=lightgrey, label=\"" +
               dot_escape(c.id) + "\\n" + dot_escape(c.function) + "\"];\n";
        for (const auto& p : c.input_ports) {
            dot += "  \"p:" + c.id + ":in:" + p + "\" [shape=" + port_shape + ", label=\"" +
                   dot_escape(p) + "\"];\n";
            dot += "  \"p:" + c.id + ":in:" + p + "\" -> \"c:" + c.id + "\";\n";
        }
        for (const auto& p : c.output_ports) {
            dot += "  \"p:" + c.id + ":out:" + p + "\" [shape=" + port_shape + ", label=\"" +
                   dot_escape(p) + "\"];\n";
            dot += "  \"c:" + c.id + "\" -> \"p:" + c.id + ":out:" + p + "\";\n";
        }
    }
    for (const auto& conn : s.graph.connections) {
        dot += "  \"p:" + conn.from.component + ":out:" + conn.from.port + "\" -> \"p:" +
               conn.to.component + ":in:" + conn.to.port + "\";\n";
    }
    // Imported rules: note shapes wired to the component with a solid arrow.
    for (const auto& [cid, rs] : imports) {
        if (rs.empty()) continue;
        dot += "  \"i:" + cid + "\" [shape=note, label=\"" +
               dot_escape(serialize_data_rules(canonicalize(rs))) + "\"];\n";
        dot += "  \"i:" + cid + "\" -> \"c:" + cid + "\" [arrowhead=normal];\n";
    }
    // Output annotations: note shapes tied to their port without an arrow.
    for (const auto& [key, rs] : s.port_annotations) {
        if (rs.empty()) continue;
        const auto& [cid, port] = key;
        dot += "  \"r:" + cid + ":" + port + "\" [shape=note, label=\"" +
               dot_escape(serialize_data_rules(rs)) + "\"];\n";
        dot += "  \"p:" + cid + ":out:" + port + "\" -> \"r:" + cid + ":" + port +
               "\" [dir=none];\n";
    }
    dot += "}\n";
    return dot;
}

}  // namespace detail

/// Renders the session report: a JSON document (activations in firing order,
/// per-port annotations as rule text, post-check flags, warnings) plus a DOT
/// rendering of the annotated graph.
inline ReportDocument emit_report(const SessionState& s,
                                  const std::map<std::string, RuleSet>& imports = {}) {
    ReportDocument report;
    nlohmann::ordered_json& doc = report.json;
    doc["session"] = {{"id", s.graph.session_id}, {"agent", s.graph.agent}};
    doc["activated"] = nlohmann::ordered_json::array();
    for (const auto& a : s.activated) {
        nlohmann::ordered_json entry;
        entry["action"] = a.action_class.text;
        entry["args"] = nlohmann::ordered_json::array();
        for (const auto& arg : a.resolved_args) {
            if (arg) {
                entry["args"].push_back(serialize_value_struct(*arg));
            } else {
                entry["args"].push_back(nullptr);
            }
        }
        entry["subject"] = a.subject;
        entry["component"] = a.component_id;
        entry["sequence"] = a.sequence;
        doc["activated"].push_back(std::move(entry));
    }
    doc["annotations"] = nlohmann::ordered_json::object();
    for (const auto& [key, rs] : s.port_annotations) {
        doc["annotations"][key.first + "." + key.second] = serialize_data_rules(rs);
    }
    doc["post_checks"] = nlohmann::ordered_json::array();
    for (const auto& pc : s.post_checks) {
        doc["post_checks"].push_back({{"component", pc.component_id},
                                      {"port", pc.port},
                                      {"action", pc.obligation.action_class.text},
                                      {"obligation", serialize_obligation(pc.obligation)}});
    }
    doc["warnings"] = nlohmann::ordered_json::array();
    for (const auto& [location, message] : s.warnings) {
        doc["warnings"].push_back({{"location", location}, {"message", message}});
    }
    report.dot = detail::dot_render(s, imports);
    return report;
}

/// Human-readable checklist: what must be done, and what to review.
inline std::string report_text(const SessionState& s) {
    std::string out;
    out += "session " + s.graph.session_id + " (agent " + s.graph.agent + ")\n";
    out += "activated obligations: " + std::to_string(s.activated.size()) + "\n";
    for (const auto& a : s.activated) {
        out += "  [ ] " + a.action_class.text + "(";
        for (std::size_t i = 0; i < a.resolved_args.size(); ++i) {
            if (i) out += ", ";
            out += a.resolved_args[i] ? serialize_value_struct(*a.resolved_args[i]) : "<absent>";
        }
        out += ") subject=" + a.subject + " at " + a.component_id + "\n";
    }
    out += "post-checks: " + std::to_string(s.post_checks.size()) + "\n";
    for (const auto& pc : s.post_checks) {
        out += "  [ ] review " + pc.obligation.action_class.text + " on " + pc.component_id +
               "." + pc.port + "\n";
    }
    if (!s.warnings.empty()) {
        out += "warnings: " + std::to_string(s.warnings.size()) + "\n";
        for (const auto& [location, message] : s.warnings) {
            out += "  - [" + location + "] " + message + "\n";
        }
    }
    return out;
}

}  // namespace govflow
