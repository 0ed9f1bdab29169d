#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace govflow {

/// Error type for structural failures (bad graphs, bad manifests, ...).
/// Parse-level problems are reported as diagnostics, not exceptions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Domain values
// ============================================================================

/// An ontological identifier in `prefix:local` form. The prefix may be empty
/// (the `:col3` shorthand used throughout rule files), but the separator is
/// always present. Equality is exact full-string comparison.
struct Iri {
    std::string text;

    auto operator<=>(const Iri&) const = default;

    /// Exactly one ':' separator, no whitespace, non-empty.
    static bool valid(std::string_view s) {
        if (s.empty()) return false;
        std::size_t colons = 0;
        for (char c : s) {
            if (c == ':') ++colons;
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
        }
        return colons == 1;
    }
};

/// A typed literal: a 64-bit integer or a string. Integer 3 and string "3"
/// are distinct values.
struct Literal {
    std::variant<std::int64_t, std::string> value;

    auto operator<=>(const Literal&) const = default;

    bool is_integer() const { return std::holds_alternative<std::int64_t>(value); }
    bool is_string() const { return std::holds_alternative<std::string>(value); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(value); }
    const std::string& as_string() const { return std::get<std::string>(value); }
};

/// The payload carried by an attribute: an optional class tag plus an ordered
/// argument list, e.g. `:column 3` or a bare `"Fictional source"`. At least
/// one of the two parts is present.
struct ValueStruct {
    std::optional<Iri> type_class;
    std::vector<Literal> args;

    auto operator<=>(const ValueStruct&) const = default;

    bool empty() const { return !type_class && args.empty(); }
};

/// A reference into an attribute's value list. Bare references (`:col3`)
/// carry index 0.
struct AttrRef {
    Iri id;
    std::size_t index = 0;

    auto operator<=>(const AttrRef&) const = default;
};

/// Attribute ids map to ordered value lists; repeated declarations of one id
/// append to its list. Canonical rulesets never map an id to an empty list.
using AttributeSet = std::map<Iri, std::vector<ValueStruct>>;

enum class Trigger {
    never,
    on_import,
    on_as_input,
    on_publish,
};

inline std::string_view trigger_name(Trigger t) {
    switch (t) {
        case Trigger::never: return "Never";
        case Trigger::on_import: return ":OnImport";
        case Trigger::on_as_input: return ":OnAsInput";
        case Trigger::on_publish: return ":OnPublish";
    }
    return "?";
}

/// When an obligation fires. A Never condition carries no subject filter.
struct ActivationCondition {
    Trigger trigger = Trigger::never;
    std::optional<std::string> subject_filter;

    auto operator<=>(const ActivationCondition&) const = default;
};

/// What must be done, under what condition, and on what the definition's
/// validity depends. Equality is structural on all four fields.
struct ObligationDefinition {
    Iri action_class;
    std::vector<AttrRef> action_args;
    std::optional<Iri> validity_binding;
    ActivationCondition condition;

    auto operator<=>(const ObligationDefinition&) const = default;
};

/// The unit that flows through the data-flow graph: attributes plus the
/// obligation definitions referencing them.
struct RuleSet {
    AttributeSet attributes;
    std::vector<ObligationDefinition> obligations;

    auto operator<=>(const RuleSet&) const = default;

    bool empty() const { return attributes.empty() && obligations.empty(); }
};

/// A concrete obligation instantiated during reasoning. Argument values are
/// frozen at activation time; a nullopt arg marks a reference that did not
/// resolve.
struct ActivatedObligation {
    Iri action_class;
    std::vector<std::optional<ValueStruct>> resolved_args;
    std::string subject;
    std::string component_id;
    std::string session_id;
    std::uint64_t sequence = 0;

    auto operator<=>(const ActivatedObligation&) const = default;
};

// ============================================================================
// Reference resolution
// ============================================================================

/// Looks up (id, index) in an attribute set; nullptr when it does not resolve.
inline const ValueStruct* resolve_ref(const AttributeSet& attrs, const AttrRef& ref) {
    auto it = attrs.find(ref.id);
    if (it == attrs.end()) return nullptr;
    if (ref.index >= it->second.size()) return nullptr;
    return &it->second[ref.index];
}

// ============================================================================
// Canonical form
// ============================================================================

/// Normal form used by equality tests and the propagation pipeline: duplicate
/// value structs within one attribute id collapse to the first occurrence
/// (references re-indexed to the survivor), duplicate obligations collapse to
/// the first, and attribute ids are kept in IRI text order. Idempotent.
inline RuleSet canonicalize(const RuleSet& rs) {
    RuleSet out;
    std::map<Iri, std::map<std::size_t, std::size_t>> remap;
    for (const auto& [id, values] : rs.attributes) {
        std::vector<ValueStruct> kept;
        auto& m = remap[id];
        for (std::size_t i = 0; i < values.size(); ++i) {
            auto where = std::find(kept.begin(), kept.end(), values[i]);
            if (where == kept.end()) {
                m[i] = kept.size();
                kept.push_back(values[i]);
            } else {
                m[i] = static_cast<std::size_t>(where - kept.begin());
            }
        }
        if (!kept.empty()) out.attributes[id] = std::move(kept);
    }
    for (const auto& ob : rs.obligations) {
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
    return out;
}

namespace detail {

/// Obligation key for set-level ruleset comparison: each argument reference is
/// replaced by the value it lands on, so two rulesets that arrange the same
/// values under different indices still compare equal. Unresolvable
/// references keep their raw (id, index) pair.
struct ResolvedArgKey {
    Iri id;
    std::variant<ValueStruct, std::size_t> target;

    auto operator<=>(const ResolvedArgKey&) const = default;
};

struct ResolvedObligationKey {
    Iri action_class;
    std::vector<ResolvedArgKey> args;
    std::optional<Iri> validity_binding;
    ActivationCondition condition;

    auto operator<=>(const ResolvedObligationKey&) const = default;
};

inline ResolvedObligationKey resolve_obligation_key(const ObligationDefinition& ob,
                                                    const AttributeSet& attrs) {
    ResolvedObligationKey key;
    key.action_class = ob.action_class;
    key.validity_binding = ob.validity_binding;
    key.condition = ob.condition;
    for (const auto& ref : ob.action_args) {
        if (const ValueStruct* v = resolve_ref(attrs, ref)) {
            key.args.push_back({ref.id, *v});
        } else {
            key.args.push_back({ref.id, ref.index});
        }
    }
    return key;
}

inline std::vector<ResolvedObligationKey> resolved_obligation_set(const RuleSet& rs) {
    std::vector<ResolvedObligationKey> keys;
    keys.reserve(rs.obligations.size());
    for (const auto& ob : rs.obligations) keys.push_back(resolve_obligation_key(ob, rs.attributes));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

}  // namespace detail

/// Set-level equality: canonicalizes both sides, then compares attribute maps
/// with value order ignored and obligation sets with order and raw reference
/// indices ignored (references compare by the value they land on).
inline bool rulesets_equal(const RuleSet& a, const RuleSet& b) {
    RuleSet ca = canonicalize(a);
    RuleSet cb = canonicalize(b);
    if (ca.attributes.size() != cb.attributes.size()) return false;
    for (const auto& [id, values] : ca.attributes) {
        auto it = cb.attributes.find(id);
        if (it == cb.attributes.end()) return false;
        std::vector<ValueStruct> lhs = values;
        std::vector<ValueStruct> rhs = it->second;
        std::sort(lhs.begin(), lhs.end());
        std::sort(rhs.begin(), rhs.end());
        if (lhs != rhs) return false;
    }
    return detail::resolved_obligation_set(ca) == detail::resolved_obligation_set(cb);
}

}  // namespace govflow
