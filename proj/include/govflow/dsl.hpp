#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "govflow/flow.hpp"
#include "govflow/model.hpp"

namespace govflow {

// ============================================================================
// Diagnostics
// ============================================================================

struct SourceSpan {
    int line = 1;    // 1-based
    int column = 1;  // 1-based
    int length = 0;
};

enum class Severity { error, warning };

struct ParseDiagnostic {
    SourceSpan span;
    Severity severity = Severity::error;
    std::string message;
};

/// Parse outcome: a value plus any diagnostics. Errors abort the parse (no
/// value); warnings accompany a successful one.
template <typename T>
struct ParseResult {
    std::optional<T> value;
    std::vector<ParseDiagnostic> diagnostics;

    bool has_errors() const {
        for (const auto& d : diagnostics) {
            if (d.severity == Severity::error) return true;
        }
        return false;
    }
    bool ok() const { return value.has_value() && !has_errors(); }
};

// ============================================================================
// Lexer
// ============================================================================

namespace detail {

enum class TokenKind {
    lparen,
    rparen,
    comma,
    lbracket,
    rbracket,
    equals,
    arrow,
    iri,
    integer,
    string,
    word,
    newline,
    end,
};

struct Token {
    TokenKind kind = TokenKind::end;
    SourceSpan span;
    std::string text;  // IRI/word text, or unescaped string contents
    std::int64_t number = 0;
};

struct ParseAbort {
    ParseDiagnostic diagnostic;
};

[[noreturn]] inline void abort_parse(SourceSpan span, std::string message) {
    throw ParseAbort{{span, Severity::error, std::move(message)}};
}

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.' || c == '/' || c == '%' || c == '~' || c == '+';
}

/// Shared tokenizer for both rule languages. Flow rules are line oriented, so
/// the lexer can surface newlines as tokens; data rules ignore them.
class Lexer {
public:
    Lexer(std::string_view src, bool newline_tokens)
        : src_(src), newline_tokens_(newline_tokens) {}

    Token next() {
        skip_blank();
        Token tok;
        tok.span = {line_, column_, 0};
        if (pos_ >= src_.size()) return tok;  // end

        const char c = src_[pos_];
        if (c == '\n') {
            tok.kind = TokenKind::newline;
            tok.span.length = 1;
            take();
            return tok;
        }
        switch (c) {
            case '(': return single(tok, TokenKind::lparen);
            case ')': return single(tok, TokenKind::rparen);
            case ',': return single(tok, TokenKind::comma);
            case '[': return single(tok, TokenKind::lbracket);
            case ']': return single(tok, TokenKind::rbracket);
            case '=': return single(tok, TokenKind::equals);
            default: break;
        }
        if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
            tok.kind = TokenKind::arrow;
            tok.span.length = 2;
            take();
            take();
            return tok;
        }
        if (c == '"') return lex_string(tok);
        if (is_word_char(c) || c == ':') return lex_run(tok);
        abort_parse({line_, column_, 1}, std::string("unexpected character '") + c + "'");
    }

private:
    Token single(Token tok, TokenKind kind) {
        tok.kind = kind;
        tok.span.length = 1;
        take();
        return tok;
    }

    Token lex_string(Token tok) {
        tok.kind = TokenKind::string;
        const SourceSpan start = tok.span;
        take();  // opening quote
        std::string out;
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') {
                abort_parse(start, "unterminated string literal");
            }
            char c = src_[pos_];
            take();
            if (c == '"') break;
            if (c == '\\') {
                if (pos_ >= src_.size()) abort_parse(start, "unterminated string literal");
                char esc = src_[pos_];
                take();
                switch (esc) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default:
                        abort_parse({line_, column_ - 2, 2},
                                    std::string("unknown escape sequence '\\") + esc + "'");
                }
            } else {
                out.push_back(c);
            }
        }
        tok.text = std::move(out);
        tok.span.length = column_ - start.column;
        return tok;
    }

    Token lex_run(Token tok) {
        std::string run;
        bool has_colon = false;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') break;
            if (c == ':') {
                has_colon = true;
            } else if (!is_word_char(c)) {
                break;
            }
            run.push_back(c);
            take();
        }
        tok.span.length = static_cast<int>(run.size());
        if (has_colon) {
            if (!Iri::valid(run) || run.back() == ':') {
                abort_parse(tok.span, "malformed IRI '" + run + "'");
            }
            tok.kind = TokenKind::iri;
            tok.text = std::move(run);
            return tok;
        }
        if (looks_numeric(run)) {
            std::int64_t value = 0;
            auto [ptr, ec] = std::from_chars(run.data(), run.data() + run.size(), value);
            if (ec != std::errc() || ptr != run.data() + run.size()) {
                abort_parse(tok.span, "integer literal '" + run + "' out of range");
            }
            tok.kind = TokenKind::integer;
            tok.number = value;
            tok.text = std::move(run);
            return tok;
        }
        tok.kind = TokenKind::word;
        tok.text = std::move(run);
        return tok;
    }

    static bool looks_numeric(std::string_view run) {
        std::size_t i = run.size() > 1 && run[0] == '-' ? 1 : 0;
        if (i >= run.size()) return false;
        for (; i < run.size(); ++i) {
            if (run[i] < '0' || run[i] > '9') return false;
        }
        return true;
    }

    void skip_blank() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r') {
                take();
            } else if (c == '\n' && !newline_tokens_) {
                take();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') take();
            } else {
                break;
            }
        }
    }

    void take() {
        if (src_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    std::string_view src_;
    bool newline_tokens_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

}  // namespace detail

// ============================================================================
// Data-rule parser
// ============================================================================

namespace detail {

class DataRuleParser {
public:
    explicit DataRuleParser(std::string_view src) : lexer_(src, /*newline_tokens=*/false) {
        advance();
    }

    RuleSet parse(std::vector<ParseDiagnostic>& diagnostics) {
        RuleSet rs;
        std::vector<std::pair<AttrRef, SourceSpan>> refs;
        while (cur_.kind != TokenKind::end) {
            if (cur_.kind == TokenKind::word && cur_.text == "Obligation") {
                parse_obligation(rs, refs);
            } else if (cur_.kind == TokenKind::word && cur_.text == "Attribute") {
                parse_attribute(rs);
            } else {
                abort_parse(cur_.span, "expected 'Obligation' or 'Attribute' statement");
            }
        }
        for (const auto& [ref, span] : refs) {
            if (!rs.attributes.count(ref.id)) {
                diagnostics.push_back({span, Severity::warning,
                                       "reference to undeclared attribute " + ref.id.text});
            }
        }
        return rs;
    }

private:
    void parse_obligation(RuleSet& rs, std::vector<std::pair<AttrRef, SourceSpan>>& refs) {
        advance();  // 'Obligation'
        expect(TokenKind::lparen, "'('");
        ObligationDefinition ob;
        ob.action_class = expect_iri("action class");
        while (cur_.kind == TokenKind::iri) {
            SourceSpan span = cur_.span;
            AttrRef ref{Iri{cur_.text}, 0};
            advance();
            if (cur_.kind == TokenKind::lbracket) {
                advance();
                if (cur_.kind != TokenKind::integer) {
                    abort_parse(cur_.span, "expected attribute index");
                }
                if (cur_.number < 0) {
                    abort_parse(cur_.span, "attribute index must be non-negative");
                }
                ref.index = static_cast<std::size_t>(cur_.number);
                advance();
                expect(TokenKind::rbracket, "']'");
            }
            ob.action_args.push_back(ref);
            refs.push_back({ref, span});
        }
        expect(TokenKind::comma, "','");
        if (cur_.kind != TokenKind::comma) {
            ob.validity_binding = expect_iri("validity binding");
        }
        expect(TokenKind::comma, "','");
        if (cur_.kind != TokenKind::rparen) {
            ob.condition = parse_condition();
        }
        expect(TokenKind::rparen, "')'");
        rs.obligations.push_back(std::move(ob));
    }

    ActivationCondition parse_condition() {
        if (cur_.kind != TokenKind::iri) {
            abort_parse(cur_.span, "expected activation condition");
        }
        ActivationCondition cond;
        if (cur_.text == ":OnImport") {
            cond.trigger = Trigger::on_import;
        } else if (cur_.text == ":OnAsInput") {
            cond.trigger = Trigger::on_as_input;
        } else if (cur_.text == ":OnPublish") {
            cond.trigger = Trigger::on_publish;
        } else {
            abort_parse(cur_.span, "unknown activation-condition token '" + cur_.text + "'");
        }
        advance();
        if (cur_.kind == TokenKind::lbracket) {
            advance();
            if (cur_.kind != TokenKind::word || cur_.text != "agent") {
                abort_parse(cur_.span, "expected 'agent' in subject filter");
            }
            advance();
            expect(TokenKind::equals, "'='");
            if (cur_.kind != TokenKind::string) {
                abort_parse(cur_.span, "expected quoted agent identifier");
            }
            cond.subject_filter = cur_.text;
            advance();
            expect(TokenKind::rbracket, "']'");
        }
        return cond;
    }

    void parse_attribute(RuleSet& rs) {
        advance();  // 'Attribute'
        expect(TokenKind::lparen, "'('");
        Iri id = expect_iri("attribute id");
        expect(TokenKind::comma, "','");
        ValueStruct vs = parse_value_struct();
        expect(TokenKind::rparen, "')'");
        rs.attributes[id].push_back(std::move(vs));
    }

    ValueStruct parse_value_struct() {
        ValueStruct vs;
        SourceSpan start = cur_.span;
        if (cur_.kind == TokenKind::iri) {
            vs.type_class = Iri{cur_.text};
            advance();
        }
        while (cur_.kind == TokenKind::integer || cur_.kind == TokenKind::string) {
            if (cur_.kind == TokenKind::integer) {
                vs.args.push_back(Literal{cur_.number});
            } else {
                vs.args.push_back(Literal{cur_.text});
            }
            advance();
        }
        if (vs.empty()) abort_parse(start, "empty value struct");
        return vs;
    }

    Iri expect_iri(const char* what) {
        if (cur_.kind != TokenKind::iri) {
            abort_parse(cur_.span, std::string("expected ") + what);
        }
        Iri iri{cur_.text};
        advance();
        return iri;
    }

    void expect(TokenKind kind, const char* what) {
        if (cur_.kind != kind) {
            abort_parse(cur_.span, std::string("expected ") + what);
        }
        advance();
    }

    void advance() { cur_ = lexer_.next(); }

    Lexer lexer_;
    Token cur_;
};

}  // namespace detail

/// Parses `Obligation(...)` / `Attribute(...)` statements into a RuleSet.
/// Repeated Attribute statements with one id append values in textual order.
/// References to never-declared attribute ids are kept and warned about.
inline ParseResult<RuleSet> parse_data_rules(std::string_view text) {
    ParseResult<RuleSet> result;
    try {
        detail::DataRuleParser parser(text);
        result.value = parser.parse(result.diagnostics);
    } catch (const detail::ParseAbort& abort) {
        result.diagnostics.push_back(abort.diagnostic);
    }
    return result;
}

// ============================================================================
// Flow-rule parser
// ============================================================================

namespace detail {

class FlowRuleParser {
public:
    explicit FlowRuleParser(std::string_view src) : lexer_(src, /*newline_tokens=*/true) {
        advance();
    }

    FlowRule parse() {
        FlowRule fr;
        bool saw_map = false;
        while (cur_.kind != TokenKind::end) {
            if (cur_.kind == TokenKind::newline) {
                advance();
                continue;
            }
            if (cur_.kind != TokenKind::word) {
                abort_parse(cur_.span, "expected 'map', 'delete' or 'edit' statement");
            }
            if (cur_.text == "map") {
                parse_map(fr);
                saw_map = true;
            } else if (cur_.text == "delete") {
                fr.refinements.push_back(parse_delete());
            } else if (cur_.text == "edit") {
                fr.refinements.push_back(parse_edit());
            } else {
                abort_parse(cur_.span, "unknown flow-rule statement '" + cur_.text + "'");
            }
            end_statement();
        }
        fr.mapping.is_default = !saw_map;
        return fr;
    }

private:
    void parse_map(FlowRule& fr) {
        advance();  // 'map'
        std::string in = expect_port("input port name");
        expect(TokenKind::arrow, "'->'");
        std::string out = expect_port("output port name");
        fr.mapping.pairs.insert({std::move(in), std::move(out)});
    }

    Refinement parse_delete() {
        SourceSpan start = cur_.span;
        advance();  // 'delete'
        Refinement r;
        r.kind = RefinementKind::del;
        r.attr_id = expect_iri("attribute id");
        if (cur_.kind == TokenKind::word && cur_.text == "value") {
            advance();
            r.match_value = parenthesized_value();
        }
        parse_target(r, start, "delete");
        return r;
    }

    Refinement parse_edit() {
        SourceSpan start = cur_.span;
        advance();  // 'edit'
        Refinement r;
        r.kind = RefinementKind::edit;
        r.attr_id = expect_iri("attribute id");
        if (cur_.kind != TokenKind::word || cur_.text != "value") {
            abort_parse(cur_.span, "edit refinement requires 'value (<value struct>)'");
        }
        advance();
        r.match_value = parenthesized_value();
        if (cur_.kind != TokenKind::word || cur_.text != "to") {
            abort_parse(cur_.span, "edit refinement requires 'to (<value struct>)'");
        }
        advance();
        r.new_value = parenthesized_value();
        parse_target(r, start, "edit");
        return r;
    }

    void parse_target(Refinement& r, SourceSpan start, const char* kind) {
        if (cur_.kind != TokenKind::word || cur_.text != "at") {
            abort_parse(start, std::string(kind) +
                                   " refinement does not name an output port ('at <port>')");
        }
        advance();
        r.at_output = expect_port("output port name");
        if (cur_.kind == TokenKind::word && cur_.text == "from") {
            advance();
            r.from_input = expect_port("input port name");
        }
    }

    ValueStruct parenthesized_value() {
        expect(TokenKind::lparen, "'('");
        ValueStruct vs;
        SourceSpan start = cur_.span;
        if (cur_.kind == TokenKind::iri) {
            vs.type_class = Iri{cur_.text};
            advance();
        }
        while (cur_.kind == TokenKind::integer || cur_.kind == TokenKind::string) {
            if (cur_.kind == TokenKind::integer) {
                vs.args.push_back(Literal{cur_.number});
            } else {
                vs.args.push_back(Literal{cur_.text});
            }
            advance();
        }
        if (vs.empty()) abort_parse(start, "empty value struct");
        expect(TokenKind::rparen, "')'");
        return vs;
    }

    void end_statement() {
        if (cur_.kind == TokenKind::newline) {
            advance();
            return;
        }
        if (cur_.kind != TokenKind::end) {
            abort_parse(cur_.span, "unexpected token after statement");
        }
    }

    std::string expect_port(const char* what) {
        if (cur_.kind != TokenKind::word) {
            abort_parse(cur_.span, std::string("expected ") + what);
        }
        std::string name = cur_.text;
        advance();
        return name;
    }

    Iri expect_iri(const char* what) {
        if (cur_.kind != TokenKind::iri) {
            abort_parse(cur_.span, std::string("expected ") + what);
        }
        Iri iri{cur_.text};
        advance();
        return iri;
    }

    void expect(TokenKind kind, const char* what) {
        if (cur_.kind != kind) {
            abort_parse(cur_.span, std::string("expected ") + what);
        }
        advance();
    }

    void advance() { cur_ = lexer_.next(); }

    Lexer lexer_;
    Token cur_;
};

}  // namespace detail

/// Parses the flow-rule language: `map <in> -> <out>` statements plus
/// `delete`/`edit` refinements, one per line, '#' comments. With no map
/// statement the default all-inputs-to-all-outputs mapping applies.
inline ParseResult<FlowRule> parse_flow_rules(std::string_view text) {
    ParseResult<FlowRule> result;
    try {
        detail::FlowRuleParser parser(text);
        result.value = parser.parse();
    } catch (const detail::ParseAbort& abort) {
        result.diagnostics.push_back(abort.diagnostic);
    }
    return result;
}

// ============================================================================
// Serialization
// ============================================================================

inline std::string serialize_literal(const Literal& lit) {
    if (lit.is_integer()) return std::to_string(lit.as_integer());
    std::string out = "\"";
    for (char c : lit.as_string()) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

inline std::string serialize_value_struct(const ValueStruct& vs) {
    std::string out;
    if (vs.type_class) out = vs.type_class->text;
    for (const auto& arg : vs.args) {
        if (!out.empty()) out.push_back(' ');
        out += serialize_literal(arg);
    }
    return out;
}

inline std::string serialize_attr_ref(const AttrRef& ref) {
    if (ref.index == 0) return ref.id.text;
    return ref.id.text + "[" + std::to_string(ref.index) + "]";
}

inline std::string serialize_condition(const ActivationCondition& cond) {
    if (cond.trigger == Trigger::never) return "";
    std::string out{trigger_name(cond.trigger)};
    if (cond.subject_filter) {
        out += "[agent=" + serialize_literal(Literal{*cond.subject_filter}) + "]";
    }
    return out;
}

inline std::string serialize_obligation(const ObligationDefinition& ob) {
    std::string out = "Obligation(" + ob.action_class.text;
    for (const auto& ref : ob.action_args) out += " " + serialize_attr_ref(ref);
    out += ", ";
    if (ob.validity_binding) out += ob.validity_binding->text;
    out += ", ";
    out += serialize_condition(ob.condition);
    out += ")";
    return out;
}

/// Emits Attribute statements (id order, value order) followed by Obligation
/// statements. Re-parsing the output of a canonical ruleset yields an equal
/// ruleset under rulesets_equal.
inline std::string serialize_data_rules(const RuleSet& rs) {
    std::string out;
    for (const auto& [id, values] : rs.attributes) {
        for (const auto& vs : values) {
            out += "Attribute(" + id.text + ", " + serialize_value_struct(vs) + ")\n";
        }
    }
    for (const auto& ob : rs.obligations) {
        out += serialize_obligation(ob) + "\n";
    }
    return out;
}

}  // namespace govflow
