#include <catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "govflow/provenance.hpp"
#include "govflow/reasoner.hpp"

using namespace govflow;

namespace {

// source -> proc_1 -> proc_2, the smallest pipeline with a real middle.
DataFlowGraph chain_graph() {
    DataFlowGraph g;
    g.session_id = "run-chain";
    g.agent = "alice";
    Component src;
    src.id = "source";
    src.function = "Produce";
    src.output_ports = {"out"};
    Component p1;
    p1.id = "proc_1";
    p1.function = "Process";
    p1.input_ports = {"in"};
    p1.output_ports = {"out"};
    Component p2 = p1;
    p2.id = "proc_2";
    p2.function = "Store";
    g.components = {src, p1, p2};
    g.connections = {{{"source", "out"}, {"proc_1", "in"}},
                     {{"proc_1", "out"}, {"proc_2", "in"}}};
    return g;
}

RuleSet rules_with_trigger(Trigger t) {
    RuleSet rs;
    ValueStruct v;
    v.args = {Literal{std::string{"payload"}}};
    rs.attributes[Iri{":note"}] = {v};
    ObligationDefinition ob;
    ob.action_class = Iri{":report"};
    ob.action_args = {{Iri{":note"}, 0}};
    ob.validity_binding = Iri{":note"};
    ob.condition.trigger = t;
    rs.obligations = {ob};
    return rs;
}

}  // namespace

// ============================================================================
// Traversal
// ============================================================================

TEST_CASE("topological order respects edges and breaks ties by id") {
    DataFlowGraph g;
    Component c;
    c.output_ports = {"out"};
    c.input_ports = {"in"};
    for (const char* id : {"root", "z", "a", "m"}) {
        c.id = id;
        g.components.push_back(c);
    }
    g.connections = {{{"root", "out"}, {"a", "in"}},
                     {{"root", "out"}, {"z", "in"}},
                     {{"a", "out"}, {"m", "in"}},
                     {{"z", "out"}, {"m", "in"}}};
    // 'm' has two inputs here only for the traversal test; reasoning is not run
    g.components[3].input_ports = {"in", "in2"};
    g.connections[3].to.port = "in2";

    CHECK(topo_order(g) == std::vector<std::string>{"root", "a", "z", "m"});
}

TEST_CASE("topological order rejects cycles") {
    DataFlowGraph g;
    Component c;
    c.input_ports = {"in"};
    c.output_ports = {"out"};
    c.id = "a";
    g.components.push_back(c);
    c.id = "b";
    g.components.push_back(c);
    g.connections = {{{"a", "out"}, {"b", "in"}}, {{"b", "out"}, {"a", "in"}}};
    CHECK_THROWS_AS(topo_order(g), Error);
}

// ============================================================================
// Activation conditions
// ============================================================================

TEST_CASE("activation condition semantics") {
    EvaluationContext ctx;
    ctx.component.id = "c";
    ctx.agent = "alice";

    SECTION("never never fires") {
        ActivationCondition cond;  // never
        ctx.is_initial = true;
        ctx.on_import_port = true;
        CHECK_FALSE(check_activation(cond, ctx));
        ctx.is_publish_virtual = true;
        CHECK_FALSE(check_activation(cond, ctx));
    }
    SECTION("on_import fires only where the rule was imported") {
        ActivationCondition cond{Trigger::on_import, std::nullopt};
        ctx.is_initial = true;
        ctx.on_import_port = true;
        CHECK(check_activation(cond, ctx));
        ctx.on_import_port = false;
        CHECK_FALSE(check_activation(cond, ctx));
        ctx.is_initial = false;
        ctx.on_import_port = true;
        CHECK_FALSE(check_activation(cond, ctx));
    }
    SECTION("on_as_input fires on real inputs of real components") {
        ActivationCondition cond{Trigger::on_as_input, std::nullopt};
        CHECK(check_activation(cond, ctx));
        ctx.on_import_port = true;
        CHECK_FALSE(check_activation(cond, ctx));
        ctx.on_import_port = false;
        ctx.component.is_virtual = true;
        CHECK_FALSE(check_activation(cond, ctx));
    }
    SECTION("on_publish fires only at publish components") {
        ActivationCondition cond{Trigger::on_publish, std::nullopt};
        CHECK_FALSE(check_activation(cond, ctx));
        ctx.is_publish_virtual = true;
        CHECK(check_activation(cond, ctx));
    }
    SECTION("subject filters compare against the session agent") {
        ActivationCondition cond{Trigger::on_as_input, "alice"};
        CHECK(check_activation(cond, ctx));
        cond.subject_filter = "bob";
        CHECK_FALSE(check_activation(cond, ctx));
    }
}

TEST_CASE("instantiate freezes argument values and flags the unresolvable") {
    RuleSet rs = rules_with_trigger(Trigger::on_import);
    ObligationDefinition ob = rs.obligations[0];
    ob.action_args.push_back({Iri{":ghost"}, 0});

    EvaluationContext ctx;
    ctx.component.id = "source";
    ctx.agent = "alice";
    ctx.session_id = "run";

    auto [record, warnings] = instantiate(ob, rs, ctx, 7);
    CHECK(record.action_class == Iri{":report"});
    CHECK(record.subject == "alice");
    CHECK(record.component_id == "source");
    CHECK(record.session_id == "run");
    CHECK(record.sequence == 7);
    REQUIRE(record.resolved_args.size() == 2);
    REQUIRE(record.resolved_args[0].has_value());
    CHECK(record.resolved_args[0]->args[0].as_string() == "payload");
    CHECK_FALSE(record.resolved_args[1].has_value());
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find(":ghost") != std::string::npos);
}

// ============================================================================
// Whole-session reasoning
// ============================================================================

TEST_CASE("an OnImport rule activates once, at its import site") {
    DataFlowGraph g = chain_graph();
    auto state = reason_session(g, {{"source", rules_with_trigger(Trigger::on_import)}});

    REQUIRE(state.activated.size() == 1);
    CHECK(state.activated[0].component_id == "source");
    CHECK(state.activated[0].subject == "alice");
    CHECK(state.activated[0].sequence == 0);

    // the rules annotate every output port downstream, unchanged
    for (const char* cid : {"source", "proc_1", "proc_2"}) {
        INFO(cid);
        CHECK(rulesets_equal(state.port_annotations.at({cid, "out"}),
                             rules_with_trigger(Trigger::on_import)));
    }
    CHECK(state.warnings.empty());
    CHECK(state.post_checks.empty());
}

TEST_CASE("an OnAsInput rule activates at each downstream arrival") {
    DataFlowGraph g = chain_graph();
    auto state = reason_session(g, {{"source", rules_with_trigger(Trigger::on_as_input)}});

    REQUIRE(state.activated.size() == 2);
    CHECK(state.activated[0].component_id == "proc_1");
    CHECK(state.activated[1].component_id == "proc_2");
    CHECK(state.activated[0].sequence == 0);
    CHECK(state.activated[1].sequence == 1);
}

TEST_CASE("a Never rule activates nowhere and flags the terminal port") {
    DataFlowGraph g = chain_graph();
    auto state = reason_session(g, {{"source", rules_with_trigger(Trigger::never)}});

    CHECK(state.activated.empty());
    REQUIRE(state.post_checks.size() == 1);
    CHECK(state.post_checks[0].component_id == "proc_2");
    CHECK(state.post_checks[0].port == "out");
    CHECK(state.post_checks[0].obligation.action_class == Iri{":report"});
}

TEST_CASE("an OnPublish rule needs an injected publish component") {
    DataFlowGraph g = chain_graph();
    RuleSet rules = rules_with_trigger(Trigger::on_publish);

    auto without = reason_session(g, {{"source", rules}});
    CHECK(without.activated.empty());

    DataFlowGraph injected = inject_virtual_components(g, {"Store"});
    auto with = reason_session(injected, {{"source", rules}});
    REQUIRE(with.activated.size() == 1);
    CHECK(with.activated[0].component_id == "proc_2__publish__out");

    SECTION("injection does not move the terminal post-check ports") {
        auto never_state = reason_session(injected, {{"source", rules_with_trigger(Trigger::never)}});
        REQUIRE(never_state.post_checks.size() == 1);
        CHECK(never_state.post_checks[0].component_id == "proc_2");
    }
}

TEST_CASE("subject filters gate activation on the session agent") {
    DataFlowGraph g = chain_graph();  // agent is alice
    RuleSet rules = rules_with_trigger(Trigger::on_import);
    rules.obligations[0].condition.subject_filter = "bob";
    CHECK(reason_session(g, {{"source", rules}}).activated.empty());

    rules.obligations[0].condition.subject_filter = "alice";
    CHECK(reason_session(g, {{"source", rules}}).activated.size() == 1);
}

TEST_CASE("one obligation arriving on two ports fires once per component") {
    DataFlowGraph g;
    g.session_id = "run-join";
    g.agent = "alice";
    Component s1;
    s1.id = "s1";
    s1.function = "Produce";
    s1.output_ports = {"out"};
    Component s2 = s1;
    s2.id = "s2";
    Component join;
    join.id = "join";
    join.function = "Collect";
    join.input_ports = {"l", "r"};
    join.output_ports = {"out"};
    g.components = {s1, s2, join};
    g.connections = {{{"s1", "out"}, {"join", "l"}}, {{"s2", "out"}, {"join", "r"}}};

    RuleSet rules = rules_with_trigger(Trigger::on_as_input);
    auto state = reason_session(g, {{"s1", rules}, {"s2", rules}});
    REQUIRE(state.activated.size() == 1);
    CHECK(state.activated[0].component_id == "join");
}

TEST_CASE("imports must target initial components") {
    DataFlowGraph g = chain_graph();
    CHECK_THROWS_WITH(reason_session(g, {{"proc_1", RuleSet{}}}),
                      Catch::Matchers::ContainsSubstring("non-initial"));
}

TEST_CASE("unresolvable activation arguments warn with a location") {
    DataFlowGraph g = chain_graph();
    RuleSet rules = rules_with_trigger(Trigger::on_import);
    rules.obligations[0].action_args.push_back({Iri{":ghost"}, 3});
    rules.obligations[0].validity_binding.reset();  // keep it alive despite :ghost

    auto state = reason_session(g, {{"source", rules}});
    REQUIRE(state.activated.size() == 1);
    REQUIRE(state.activated[0].resolved_args.size() == 2);
    CHECK_FALSE(state.activated[0].resolved_args[1].has_value());
    REQUIRE_FALSE(state.warnings.empty());
    CHECK(state.warnings[0].first == "source.__import__");
}

// ============================================================================
// The secret-column scenario, end to end
// ============================================================================

TEST_CASE("an edited then deleted secret column stops flowing") {
    const char* doc = R"({
      "session": {"id": "fig2", "agent": "op"},
      "components": [
        {"id": "input_1", "function": "Produce", "inputs": [], "outputs": ["out"]},
        {"id": "input_2", "function": "Produce", "inputs": [], "outputs": ["out"]},
        {"id": "p1", "function": "Process", "inputs": ["in1", "in2"], "outputs": ["out"],
         "flow_rule": "edit :col value (:column 3) to (:column 5) at out\n"},
        {"id": "p2", "function": "Process", "inputs": ["in"], "outputs": ["out"],
         "flow_rule": "delete :col value (:column 5) at out\n"}
      ],
      "connections": [
        {"from": ["input_1", "out"], "to": ["p1", "in1"]},
        {"from": ["input_2", "out"], "to": ["p1", "in2"]},
        {"from": ["p1", "out"], "to": ["p2", "in"]}
      ]
    })";
    DataFlowGraph g = load_provenance(doc);

    ImportManifest manifest;
    manifest.entries["input_2"] = "Obligation(:secret :col, :col, )\nAttribute(:col, :column 3)\n";
    auto imports = recognize_imports(g, manifest);
    auto state = reason_session(g, imports);

    // P1's output: the obligation survives, now bound to column 5
    const RuleSet& at_p1 = state.port_annotations.at({"p1", "out"});
    REQUIRE(at_p1.obligations.size() == 1);
    CHECK(at_p1.obligations[0].action_class == Iri{":secret"});
    const ValueStruct* bound = resolve_ref(at_p1.attributes, at_p1.obligations[0].action_args[0]);
    REQUIRE(bound != nullptr);
    CHECK(bound->type_class == Iri{":column"});
    REQUIRE(bound->args.size() == 1);
    CHECK(bound->args[0].as_integer() == 5);

    // P2's output: the column is gone and the obligation lapsed with it
    const RuleSet& at_p2 = state.port_annotations.at({"p2", "out"});
    CHECK(at_p2.empty());

    CHECK(state.warnings.empty());
    CHECK(state.post_checks.empty());
    CHECK(state.activated.empty());
}

// ============================================================================
// Reports
// ============================================================================

TEST_CASE("the JSON report carries the full session story") {
    DataFlowGraph g = chain_graph();
    RuleSet rules = rules_with_trigger(Trigger::on_import);
    auto imports = std::map<std::string, RuleSet>{{"source", rules}};
    auto state = reason_session(g, imports);
    auto report = emit_report(state, imports);
    const auto& doc = report.json;

    CHECK(doc["session"]["id"] == "run-chain");
    CHECK(doc["session"]["agent"] == "alice");
    REQUIRE(doc["activated"].size() == 1);
    CHECK(doc["activated"][0]["action"] == ":report");
    CHECK(doc["activated"][0]["args"][0] == "\"payload\"");
    CHECK(doc["activated"][0]["component"] == "source");
    CHECK(doc["activated"][0]["sequence"] == 0);
    REQUIRE(doc["annotations"].contains("proc_1.out"));
    CHECK(doc["annotations"]["proc_1.out"] ==
          "Attribute(:note, \"payload\")\nObligation(:report :note, :note, :OnImport)\n");
    CHECK(doc["post_checks"].empty());
    CHECK(doc["warnings"].empty());

    SECTION("emission is deterministic") {
        auto again = emit_report(state, imports);
        CHECK(again.json.dump(2) == report.json.dump(2));
        CHECK(again.dot == report.dot);
    }
    SECTION("unresolved activation arguments render as null") {
        RuleSet broken = rules;
        broken.obligations[0].action_args.push_back({Iri{":ghost"}, 0});
        broken.obligations[0].validity_binding.reset();
        auto s2 = reason_session(g, {{"source", broken}});
        auto r2 = emit_report(s2);
        REQUIRE(r2.json["activated"].size() == 1);
        CHECK(r2.json["activated"][0]["args"][1].is_null());
        REQUIRE(r2.json["warnings"].size() >= 1);
        CHECK(r2.json["warnings"][0]["location"] == "source.__import__");
    }
    SECTION("post-checks surface in the report") {
        auto s3 = reason_session(g, {{"source", rules_with_trigger(Trigger::never)}});
        auto r3 = emit_report(s3);
        REQUIRE(r3.json["post_checks"].size() == 1);
        CHECK(r3.json["post_checks"][0]["component"] == "proc_2");
        CHECK(r3.json["post_checks"][0]["action"] == ":report");
        CHECK(r3.json["post_checks"][0]["obligation"] ==
              "Obligation(:report :note, :note, )");
    }
}

TEST_CASE("the DOT rendering draws components, ports, rules and imports") {
    DataFlowGraph g = chain_graph();
    RuleSet rules = rules_with_trigger(Trigger::on_import);
    auto imports = std::map<std::string, RuleSet>{{"source", rules}};
    auto state = reason_session(g, imports);
    std::string dot = emit_report(state, imports).dot;

    CHECK(dot.find("digraph session {") != std::string::npos);
    CHECK(dot.find("\"c:proc_1\" [shape=box") != std::string::npos);
    CHECK(dot.find("\"p:source:out:out\" -> \"p:proc_1:in:in\";") != std::string::npos);
    CHECK(dot.find("\"i:source\" -> \"c:source\" [arrowhead=normal];") != std::string::npos);
    CHECK(dot.find("[dir=none];") != std::string::npos);
    CHECK(dot.find("\\l") != std::string::npos);  // multi-line rule labels
    CHECK(dot.find("shape=note") != std::string::npos);
}

TEST_CASE("the text report reads as a checklist") {
    DataFlowGraph g = chain_graph();
    auto state = reason_session(g, {{"source", rules_with_trigger(Trigger::on_as_input)}});
    std::string text = report_text(state);
    CHECK(text.find("activated obligations: 2") != std::string::npos);
    CHECK(text.find("  [ ] :report(\"payload\") subject=alice at proc_1") != std::string::npos);
    CHECK(text.find("post-checks: 0") != std::string::npos);
}
