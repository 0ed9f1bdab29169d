#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "govflow/model.hpp"

namespace govflow {

// ============================================================================
// Flow rule types
// ============================================================================

/// Input-to-output routing of rulesets within one component. The default
/// mapping sends every input's rules to every output.
struct PortMapping {
    std::set<std::pair<std::string, std::string>> pairs;
    bool is_default = true;

    auto operator<=>(const PortMapping&) const = default;
};

enum class RefinementKind { del, edit };

/// A modification applied to attributes as rules cross a component. Delete
/// removes all values of an id, or only those equal to match_value. Edit
/// replaces values equal to match_value with new_value. A refinement with
/// from_input set acts only on rules routed from that input port.
struct Refinement {
    RefinementKind kind = RefinementKind::del;
    Iri attr_id;
    std::optional<ValueStruct> match_value;
    std::optional<ValueStruct> new_value;  // edit only
    std::string at_output;
    std::optional<std::string> from_input;

    auto operator<=>(const Refinement&) const = default;
};

struct FlowRule {
    PortMapping mapping;
    std::vector<Refinement> refinements;

    auto operator<=>(const FlowRule&) const = default;
};

/// Rulesets entering or leaving a component, keyed by port and kept in port
/// order. A vector (not a map) so the caller controls declared-port order.
using PortedRuleSets = std::vector<std::pair<std::string, RuleSet>>;

// ============================================================================
// Routing
// ============================================================================

/// Distributes input-port rulesets to output ports. Every declared output
/// gets an entry; with the default mapping each output receives every input,
/// otherwise only the mapped pairs. List order follows the order of `inputs`.
inline std::map<std::string, PortedRuleSets> route(const PortMapping& mapping,
                                                   const PortedRuleSets& inputs,
                                                   const std::vector<std::string>& output_ports) {
    std::set<std::string> declared_outputs(output_ports.begin(), output_ports.end());
    if (!mapping.is_default) {
        for (const auto& [in, out] : mapping.pairs) {
            if (!declared_outputs.count(out)) {
                throw Error("port mapping references undeclared output port '" + out + "'");
            }
            (void)in;  // unconnected-but-declared inputs are legal; see load-time checks
        }
    }
    std::map<std::string, PortedRuleSets> routed;
    for (const auto& out : output_ports) {
        PortedRuleSets list;
        for (const auto& [in, rs] : inputs) {
            if (mapping.is_default || mapping.pairs.count({in, out})) list.push_back({in, rs});
        }
        routed[out] = std::move(list);
    }
    return routed;
}

// ============================================================================
// Refinements
// ============================================================================

namespace detail {

/// Rewrites one ruleset's attribute for a delete refinement. Surviving values
/// shift down and references follow them; references to deleted values are
/// left pointing one past the new end, i.e. dangling, for pruning to report.
inline void delete_values(RuleSet& rs, const Iri& id, const std::optional<ValueStruct>& match) {
    auto it = rs.attributes.find(id);
    if (it == rs.attributes.end()) return;  // missing target: refinement passes
    std::vector<ValueStruct> kept;
    std::map<std::size_t, std::size_t> remap;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
        if (!match || it->second[i] == *match) continue;
        remap[i] = kept.size();
        kept.push_back(it->second[i]);
    }
    if (kept.size() == it->second.size()) return;  // nothing matched
    const std::size_t dangle = kept.size();
    for (auto& ob : rs.obligations) {
        for (auto& ref : ob.action_args) {
            if (ref.id != id || ref.index >= it->second.size()) continue;
            auto rit = remap.find(ref.index);
            ref.index = rit != remap.end() ? rit->second : dangle;
        }
    }
    if (kept.empty()) {
        rs.attributes.erase(it);
    } else {
        it->second = std::move(kept);
    }
}

inline void edit_values(RuleSet& rs, const Iri& id, const ValueStruct& match,
                        const ValueStruct& replacement) {
    auto it = rs.attributes.find(id);
    if (it == rs.attributes.end()) return;
    for (auto& v : it->second) {
        if (v == match) v = replacement;
    }
}

}  // namespace detail

/// Applies the refinements for one output port, in listed order, to each
/// routed ruleset. Missing targets are no-ops; deletion that empties an
/// attribute's value list removes the id.
inline PortedRuleSets apply_refinements(const PortedRuleSets& routed,
                                        const std::vector<Refinement>& refinements) {
    PortedRuleSets result = routed;
    for (auto& [port, rs] : result) {
        for (const auto& r : refinements) {
            if (r.from_input && *r.from_input != port) continue;
            if (r.kind == RefinementKind::del) {
                detail::delete_values(rs, r.attr_id, r.match_value);
            } else {
                detail::edit_values(rs, r.attr_id, *r.match_value, *r.new_value);
            }
        }
    }
    return result;
}

// ============================================================================
// Validity pruning
// ============================================================================

/// Drops every obligation whose validity binding names an attribute that no
/// longer exists (silently: that is the binding's contract). Obligations kept
/// despite a dangling action argument produce a warning.
inline std::pair<RuleSet, std::vector<std::string>> prune_invalid(const RuleSet& rs) {
    RuleSet out;
    out.attributes = rs.attributes;
    std::vector<std::string> warnings;
    for (const auto& ob : rs.obligations) {
        if (ob.validity_binding && !rs.attributes.count(*ob.validity_binding)) continue;
        for (const auto& ref : ob.action_args) {
            if (!resolve_ref(rs.attributes, ref)) {
                warnings.push_back("obligation " + ob.action_class.text + ": argument " +
                                   ref.id.text + "[" + std::to_string(ref.index) +
                                   "] does not resolve");
            }
        }
        out.obligations.push_back(ob);
    }
    return {std::move(out), std::move(warnings)};
}

// ============================================================================
// Merging
// ============================================================================

/// Merges rulesets bound for one output port. Walks the inputs in order; an
/// attribute value matching an existing (id, value) entry redirects that
/// ruleset's references to the survivor, otherwise the value is appended and
/// references shift to its new index. Obligations that become duplicates
/// after redirection are dropped. References that do not resolve within their
/// own ruleset are carried verbatim.
inline RuleSet merge(const std::vector<RuleSet>& rulesets) {
    RuleSet out;
    for (const RuleSet& r : rulesets) {
        std::map<Iri, std::map<std::size_t, std::size_t>> remap;
        for (const auto& [id, values] : r.attributes) {
            auto& merged = out.attributes[id];
            auto& m = remap[id];
            for (std::size_t i = 0; i < values.size(); ++i) {
                auto where = std::find(merged.begin(), merged.end(), values[i]);
                if (where != merged.end()) {
                    m[i] = static_cast<std::size_t>(where - merged.begin());
                } else {
                    m[i] = merged.size();
                    merged.push_back(values[i]);
                }
            }
        }
        for (const auto& ob : r.obligations) {
            ObligationDefinition rewritten = ob;
            for (auto& ref : rewritten.action_args) {
                auto mit = remap.find(ref.id);
                if (mit == remap.end()) continue;
                auto rit = mit->second.find(ref.index);
                if (rit != mit->second.end()) ref.index = rit->second;
            }
            if (std::find(out.obligations.begin(), out.obligations.end(), rewritten) ==
                out.obligations.end()) {
                out.obligations.push_back(std::move(rewritten));
            }
        }
    }
    // Guard against empty lists introduced by empty-input ids.
    for (auto it = out.attributes.begin(); it != out.attributes.end();) {
        it = it->second.empty() ? out.attributes.erase(it) : std::next(it);
    }
    return out;
}

// ============================================================================
// Full per-component pipeline
// ============================================================================

struct PortResult {
    RuleSet ruleset;
    std::vector<std::string> warnings;
};

/// route -> refine -> prune (per routed ruleset) -> merge -> canonicalize,
/// per output port. Pruning runs before merging so a binding broken by a
/// refinement removes its obligation before output annotation, and warnings
/// stay attributable to the input port they came from.
inline std::map<std::string, PortResult> propagate(const FlowRule& flow_rule,
                                                   const PortedRuleSets& inputs,
                                                   const std::vector<std::string>& output_ports) {
    auto routed = route(flow_rule.mapping, inputs, output_ports);
    std::map<std::string, PortResult> results;
    for (const auto& out_port : output_ports) {
        std::vector<Refinement> for_port;
        for (const auto& r : flow_rule.refinements) {
            if (r.at_output == out_port) for_port.push_back(r);
        }
        PortedRuleSets refined = apply_refinements(routed.at(out_port), for_port);
        PortResult result;
        std::vector<RuleSet> to_merge;
        for (const auto& [in_port, rs] : refined) {
            auto [pruned, warnings] = prune_invalid(rs);
            for (const auto& w : warnings) {
                result.warnings.push_back("from input '" + in_port + "': " + w);
            }
            to_merge.push_back(std::move(pruned));
        }
        result.ruleset = canonicalize(merge(to_merge));
        results[out_port] = std::move(result);
    }
    return results;
}

}  // namespace govflow
