#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "govflow/provenance.hpp"

namespace govflow {

// ============================================================================
// Synthetic workflow fixtures
// ============================================================================

enum class Pattern { single_line, spreading, collecting, redispatching };

inline std::string_view pattern_name(Pattern p) {
    switch (p) {
        case Pattern::single_line: return "single_line";
        case Pattern::spreading: return "spreading";
        case Pattern::collecting: return "collecting";
        case Pattern::redispatching: return "redispatching";
    }
    return "?";
}

inline std::optional<Pattern> parse_pattern(std::string_view name) {
    if (name == "single_line") return Pattern::single_line;
    if (name == "spreading") return Pattern::spreading;
    if (name == "collecting") return Pattern::collecting;
    if (name == "redispatching") return Pattern::redispatching;
    return std::nullopt;
}

/// Parameters for one synthetic fixture. depth is the length of each 1-1
/// processor chain; fan is the branch width for the multi-port patterns.
struct PatternSpec {
    Pattern pattern = Pattern::single_line;
    int depth = 1;
    int fan = 2;
    std::uint64_t seed = 0;
};

struct SynthFixture {
    std::string provenance_json;
    ImportManifest manifest;
};

inline std::string manifest_to_json(const ImportManifest& manifest) {
    nlohmann::ordered_json doc;
    doc["imports"] = nlohmann::ordered_json::object();
    for (const auto& [cid, text] : manifest.entries) doc["imports"][cid] = text;
    return doc.dump(2) + "\n";
}

namespace detail {

inline std::string seed_tag(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

inline std::string placeholder_rules(const std::string& producer_id, const std::string& tag) {
    return "Obligation(:placeholder_" + producer_id + " :note_" + producer_id + ", :note_" +
           producer_id + ", )\n" + "Attribute(:note_" + producer_id + ", \"placeholder " + tag +
           " for " + producer_id + "\")\n";
}

struct GraphBuilder {
    DataFlowGraph g;

    void add(const std::string& id, const std::string& function,
             std::vector<std::string> inputs, std::vector<std::string> outputs) {
        Component c;
        c.id = id;
        c.function = function;
        c.input_ports = std::move(inputs);
        c.output_ports = std::move(outputs);
        g.components.push_back(std::move(c));
    }

    void connect(const std::string& from_id, const std::string& from_port,
                 const std::string& to_id, const std::string& to_port) {
        g.connections.push_back({{from_id, from_port}, {to_id, to_port}});
    }

    /// Appends a chain of depth 1-1 processors after (from_id, from_port);
    /// returns the id of the last element (or from_id when depth is 0).
    std::pair<std::string, std::string> chain(const std::string& prefix, int depth,
                                              std::string from_id, std::string from_port) {
        for (int k = 1; k <= depth; ++k) {
            std::string id = prefix + std::to_string(k);
            add(id, "Process", {"in"}, {"out"});
            connect(from_id, from_port, id, "in");
            from_id = id;
            from_port = "out";
        }
        return {from_id, from_port};
    }
};

}  // namespace detail

/// Builds one synthetic provenance fixture plus a manifest of distinct
/// placeholder rules, one per producer. Same spec, same bytes.
///
/// Vertex coverage per pattern: single_line {1-1}; spreading {1-1, 1-n};
/// collecting {1-1, n-1}; redispatching {1-1, n-1, n-m}. Producers have one
/// output port and terminal components keep a declared (dangling) output.
inline SynthFixture generate(const PatternSpec& spec) {
    if (spec.depth < 1) throw Error("synth: depth must be >= 1");
    if (spec.pattern != Pattern::single_line && spec.fan < 2) {
        throw Error("synth: fan must be >= 2 for this pattern");
    }
    const std::string tag = detail::seed_tag(spec.seed);
    detail::GraphBuilder b;
    b.g.session_id = "synth-" + std::string(pattern_name(spec.pattern)) + "-d" +
                     std::to_string(spec.depth) + "-f" + std::to_string(spec.fan) + "-" + tag;
    b.g.agent = "synthetic-operator";

    std::vector<std::string> producers;
    switch (spec.pattern) {
        case Pattern::single_line: {
            b.add("source", "Produce", {}, {"out"});
            producers = {"source"};
            std::pair<std::string, std::string> prev{"source", "out"};
            for (int k = 1; k <= spec.depth; ++k) {
                std::string id = "proc_" + std::to_string(k);
                b.add(id, k == spec.depth ? "Store" : "Process", {"in"}, {"out"});
                b.connect(prev.first, prev.second, id, "in");
                prev = {id, "out"};
            }
            break;
        }
        case Pattern::spreading: {
            b.add("source", "Produce", {}, {"out"});
            producers = {"source"};
            auto prev = b.chain("proc_", spec.depth, "source", "out");
            std::vector<std::string> outs;
            for (int i = 1; i <= spec.fan; ++i) outs.push_back("out_" + std::to_string(i));
            b.add("split", "Spread", {"in"}, outs);
            b.connect(prev.first, prev.second, "split", "in");
            for (int i = 1; i <= spec.fan; ++i) {
                std::string id = "branch_" + std::to_string(i);
                b.add(id, "Store", {"in"}, {"out"});
                b.connect("split", "out_" + std::to_string(i), id, "in");
            }
            break;
        }
        case Pattern::collecting: {
            std::vector<std::string> ins;
            for (int i = 1; i <= spec.fan; ++i) ins.push_back("in_" + std::to_string(i));
            for (int i = 1; i <= spec.fan; ++i) {
                std::string pid = "prod_" + std::to_string(i);
                b.add(pid, "Produce", {}, {"out"});
                producers.push_back(pid);
            }
            b.add("collect", "Collect", ins, {"out"});
            for (int i = 1; i <= spec.fan; ++i) {
                auto tail = b.chain("chain_" + std::to_string(i) + "_", spec.depth,
                                    "prod_" + std::to_string(i), "out");
                b.connect(tail.first, tail.second, "collect", "in_" + std::to_string(i));
            }
            b.add("sink", "Store", {"in"}, {"out"});
            b.connect("collect", "out", "sink", "in");
            break;
        }
        case Pattern::redispatching: {
            std::vector<std::string> ins;
            std::vector<std::string> outs;
            for (int i = 1; i <= spec.fan; ++i) {
                ins.push_back("in_" + std::to_string(i));
                outs.push_back("out_" + std::to_string(i));
            }
            for (int i = 1; i <= spec.fan; ++i) {
                std::string pid = "prod_" + std::to_string(i);
                b.add(pid, "Produce", {}, {"out"});
                producers.push_back(pid);
            }
            b.add("redispatch1", "Collect", ins, {"out"});
            for (int i = 1; i <= spec.fan; ++i) {
                auto tail = b.chain("chain_" + std::to_string(i) + "_", spec.depth,
                                    "prod_" + std::to_string(i), "out");
                b.connect(tail.first, tail.second, "redispatch1", "in_" + std::to_string(i));
            }
            // The single collected stream fans back out into every input of
            // the multi-to-multi stage.
            b.add("redispatch2", "Redispatch", ins, outs);
            for (int i = 1; i <= spec.fan; ++i) {
                b.connect("redispatch1", "out", "redispatch2", "in_" + std::to_string(i));
            }
            for (int i = 1; i <= spec.fan; ++i) {
                std::string id = "sink_" + std::to_string(i);
                b.add(id, "Store", {"in"}, {"out"});
                b.connect("redispatch2", "out_" + std::to_string(i), id, "in");
            }
            break;
        }
    }

    SynthFixture fixture;
    fixture.provenance_json = serialize_provenance(b.g);
    for (const auto& pid : producers) {
        fixture.manifest.entries[pid] = detail::placeholder_rules(pid, tag);
    }
    return fixture;
}

}  // namespace govflow
