// govflow command line front end: parse / reason / gen.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "govflow/govflow.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 user/input error, 2 environment (IO) error.
constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitEnv = 2;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file_or_throw(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
    return buf.str();
}

void write_file_or_throw(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

bool use_color() {
    const char* env = std::getenv("GOVFLOW_COLOR");
    const std::string mode = env ? env : "auto";
    if (mode == "always") return true;
    if (mode == "never") return false;
    return isatty(fileno(stderr)) != 0;
}

void print_diagnostics(const std::string& label,
                       const std::vector<govflow::ParseDiagnostic>& diags) {
    const bool color = use_color();
    for (const auto& d : diags) {
        const bool is_error = d.severity == govflow::Severity::error;
        const char* tint = is_error ? "\033[31m" : "\033[33m";
        std::cerr << label << ':' << d.span.line << ':' << d.span.column << ": "
                  << (color ? tint : "") << (is_error ? "error" : "warning")
                  << (color ? "\033[0m" : "") << ": " << d.message << '\n';
    }
}

// ----------------------------------------------------------------------------
// parse
// ----------------------------------------------------------------------------

int cmd_parse(const std::vector<std::string>& files) {
    bool any_error = false;
    for (const auto& file : files) {
        const std::string text = read_file_or_throw(file);
        std::vector<govflow::ParseDiagnostic> diags;
        bool failed = false;
        if (fs::path(file).extension() == ".flowrule") {
            auto res = govflow::parse_flow_rules(text);
            diags = res.diagnostics;
            failed = res.has_errors();
        } else {
            auto res = govflow::parse_data_rules(text);
            diags = res.diagnostics;
            failed = res.has_errors();
        }
        print_diagnostics(file, diags);
        if (!failed) std::cout << file << ": ok\n";
        any_error |= failed;
    }
    return any_error ? kExitUser : kExitOk;
}

// ----------------------------------------------------------------------------
// reason
// ----------------------------------------------------------------------------

struct ReasonOpts {
    std::string provenance;
    std::string imports;
    std::string config;
    std::string out;
    std::string format = "json";
};

std::set<std::string> load_publish_functions(const std::string& config_path) {
    std::set<std::string> publish;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_or_throw(config_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw govflow::Error("config '" + config_path + "': " + e.what());
    }
    if (!doc.is_object()) throw govflow::Error("config '" + config_path + "': expected an object");
    if (doc.contains("publish_functions")) {
        const auto& list = doc["publish_functions"];
        if (!list.is_array()) {
            throw govflow::Error("config '" + config_path + "': publish_functions must be an array");
        }
        for (const auto& item : list) {
            if (!item.is_string()) {
                throw govflow::Error("config '" + config_path +
                                     "': publish_functions entries must be strings");
            }
            publish.insert(item.get<std::string>());
        }
    }
    return publish;
}

int cmd_reason(const ReasonOpts& o) {
    auto graph = govflow::load_provenance(read_file_or_throw(o.provenance));
    std::set<std::string> publish;
    if (!o.config.empty()) publish = load_publish_functions(o.config);
    graph = govflow::inject_virtual_components(graph, publish);

    govflow::ImportManifest manifest;
    if (!o.imports.empty()) {
        const fs::path base = fs::path(o.imports).parent_path();
        manifest = govflow::load_import_manifest(
            read_file_or_throw(o.imports),
            [&](const std::string& rel) { return read_file_or_throw(base / rel); });
    }
    std::vector<std::string> import_warnings;
    auto imports = govflow::recognize_imports(graph, manifest, &import_warnings);
    for (const auto& w : import_warnings) std::cerr << "warning: " << w << '\n';

    auto state = govflow::reason_session(graph, imports);
    for (const auto& [where, message] : state.warnings) {
        std::cerr << "warning: " << where << ": " << message << '\n';
    }

    auto report = govflow::emit_report(state, imports);
    std::string rendered;
    if (o.format == "json") {
        rendered = report.json.dump(2) + "\n";
    } else if (o.format == "dot") {
        rendered = report.dot;
    } else {
        rendered = govflow::report_text(state);
    }

    std::ostringstream summary;
    summary << "activated: " << state.activated.size()
            << ", post-checks: " << state.post_checks.size() << '\n';
    if (o.out.empty()) {
        std::cout << rendered;
        std::cerr << summary.str();
    } else {
        write_file_or_throw(o.out, rendered);
        std::cout << summary.str();
    }
    return kExitOk;
}

// ----------------------------------------------------------------------------
// gen
// ----------------------------------------------------------------------------

struct GenOpts {
    std::string pattern;
    int depth = 1;
    int fan = 2;
    std::uint64_t seed = 0;
    std::string out = ".";
};

int cmd_gen(const GenOpts& o) {
    auto pattern = govflow::parse_pattern(o.pattern);
    if (!pattern) {
        std::cerr << "error: unknown pattern '" << o.pattern << "'\n";
        return kExitUser;
    }
    govflow::PatternSpec spec;
    spec.pattern = *pattern;
    spec.depth = o.depth;
    spec.fan = o.fan;
    spec.seed = o.seed;
    auto fixture = govflow::generate(spec);

    fs::create_directories(o.out);
    const fs::path prov = fs::path(o.out) / "provenance.json";
    const fs::path imports = fs::path(o.out) / "imports.json";
    write_file_or_throw(prov, fixture.provenance_json);
    write_file_or_throw(imports, govflow::manifest_to_json(fixture.manifest));
    std::cout << "wrote " << prov.string() << '\n';
    std::cout << "wrote " << imports.string() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"govflow: propagates data-governance rules over provenance data-flow graphs"};
    app.require_subcommand(1);

    std::vector<std::string> parse_files;
    auto* parse_cmd = app.add_subcommand("parse", "Check .datarule / .flowrule files");
    parse_cmd->add_option("files", parse_files, "Rule files to check")->required()->expected(-1);

    ReasonOpts ropts;
    auto* reason_cmd = app.add_subcommand("reason", "Reason over one provenance session");
    reason_cmd->add_option("--provenance", ropts.provenance, "Provenance JSON document")
        ->required();
    reason_cmd->add_option("--imports", ropts.imports, "Import manifest JSON");
    reason_cmd->add_option("--config", ropts.config, "Config JSON with publish_functions");
    reason_cmd->add_option("--out", ropts.out, "Report output path (default: stdout)");
    reason_cmd->add_option("--format", ropts.format, "Report format")
        ->check(CLI::IsMember({"json", "dot", "text"}));

    GenOpts gopts;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic workflow fixture");
    gen_cmd->add_option("--pattern", gopts.pattern,
                        "single_line | spreading | collecting | redispatching")
        ->required();
    gen_cmd->add_option("--depth", gopts.depth, "Processor chain length")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--fan", gopts.fan, "Branch width for multi-port patterns");
    gen_cmd->add_option("--seed", gopts.seed, "Deterministic generation seed");
    gen_cmd->add_option("--out", gopts.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUser;
    }

    try {
        if (parse_cmd->parsed()) return cmd_parse(parse_files);
        if (reason_cmd->parsed()) return cmd_reason(ropts);
        if (gen_cmd->parsed()) return cmd_gen(gopts);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitEnv;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitEnv;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUser;
    }
    return kExitOk;
}
