#include "pfm/cli.hpp"

#include "pfm/app.hpp"
#include "pfm/error.hpp"
#include "pfm/service.hpp"
#include "pfm/synth.hpp"
#include "pfm/time.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace pfm {

namespace {

struct Globals {
    std::string data_dir = "data";
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string user;
    bool json = false;
};

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    out << text;
    if (!out.flush()) fail(ErrorCode::IoError, "write failed: " + path);
}

EngineOptions engine_options(const Globals& g) {
    EngineOptions o;
    o.data_dir = g.data_dir;
    if (!g.config.empty()) o.config_path = g.config;
    o.seed = g.seed;
    if (const char* key = std::getenv("PFM_NUTRITION_API_KEY"); key && *key) {
        o.api_key = key;
        o.transport = std::make_shared<HttpTransport>();
    }
    return o;
}

// --user wins; otherwise the only user in the store.
std::string pick_user(const Globals& g, Engine& engine) {
    if (!g.user.empty()) {
        if (!valid_user_id(g.user)) fail(ErrorCode::InvalidArgument, "invalid user id '" + g.user + "'");
        return g.user;
    }
    const auto users = engine.store().users();
    if (users.size() == 1) return users.front();
    fail(ErrorCode::InvalidArgument, users.empty() ? "store has no users" : "store has several users; pass --user");
}

std::string fmt(double x, int precision) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << x;
    return s.str();
}

void print_verify_table(const VerifiedRule& r, std::ostream& out) {
    out << "hypothesis  " << r.hypothesis.name << "\n";
    out << "occurrences " << r.n_occurrences << "  treated " << r.n_treated << "  control " << r.n_control << "\n";
    out << "effect      " << fmt(r.overall_effect, 3) << " (" << r.direction << ")  significant "
        << (r.significant ? "yes" : "no") << "  min adjusted p " << fmt(r.min_adjusted_p, 4) << "\n\n";
    std::size_t width = 7;
    for (const auto& c : r.contexts) width = std::max(width, c.key.size());
    out << std::left << std::setw(static_cast<int>(width) + 2) << "context" << std::right << std::setw(6) << "n_t"
        << std::setw(6) << "n_c" << std::setw(10) << "effect" << std::setw(9) << "p" << std::setw(9) << "adj_p"
        << std::setw(9) << "validity" << "  flags\n";
    for (const auto& c : r.contexts) {
        std::string flags;
        if (c.degenerate) flags += " degenerate";
        if (c.low_power) flags += " low_power";
        if (!c.estimable) flags += " not_estimable";
        out << std::left << std::setw(static_cast<int>(width) + 2) << c.key << std::right << std::setw(6) << c.n_treated
            << std::setw(6) << c.n_control << std::setw(10) << fmt(c.effect, 3) << std::setw(9) << fmt(c.p_value, 4)
            << std::setw(9) << fmt(c.adjusted_p, 4) << std::setw(9) << fmt(c.validity, 3) << " " << flags << "\n";
    }
    out << "\n";
}

int serve(const Globals& g, const std::string& host, int port, const std::string& ui_dir, std::ostream& out) {
    // Block termination signals in every thread; this one waits for them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ServiceOptions so;
    so.engine = engine_options(g);
    so.host = host;
    so.port = port;
    so.ui_dir = ui_dir;
    Service service(so);
    const int bound = service.bind();
    out << "listening on http://" << host << ":" << bound << std::endl;
    std::thread server([&] { service.serve(); });
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
    server.join();
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Personal food model engine", "pfm"};
    app.failure_message(CLI::FailureMessage::help);
    app.fallthrough();
    app.require_subcommand(1);

    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--data-dir", g.data_dir, "Store root (default: data)");
    app.add_option("--config", g.config, "Engine config JSON (default: <data-dir>/config/pfm.json)");
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed for permutation, bootstrap and synthesis");
    app.add_option("--user", g.user, "User id (default: the only user in the store)");
    app.add_flag("--json", g.json, "Machine-readable JSON output");

    std::string import_file;
    auto* import_cmd = app.add_subcommand("import", "Append a JSONL chronicle to the store");
    import_cmd->add_option("file", import_file, "Chronicle JSONL")->required();

    auto* export_cmd = app.add_subcommand("export", "Print a user's chronicle as JSONL");

    auto* enrich_cmd = app.add_subcommand("enrich", "Attach nutrition to unenriched food events");

    std::string hm_a;
    std::string hm_b;
    std::string hm_window;
    std::uint64_t hm_support = 1;
    bool hm_csv = false;
    auto* heatmap_cmd = app.add_subcommand("heatmap", "Co-occurrence matrix of two streams");
    heatmap_cmd->add_option("--a", hm_a, "Row stream categorizer, e.g. food or sleep.sleep_quality:60,75")->required();
    heatmap_cmd->add_option("--b", hm_b, "Column stream categorizer")->required();
    heatmap_cmd->add_option("--window", hm_window, "Window, e.g. 180, 3h, 90m")->required();
    heatmap_cmd->add_option("--min-support", hm_support, "Candidate threshold (JSON output)");
    heatmap_cmd->add_flag("--csv", hm_csv, "CSV output (default unless --json)");

    std::string hypothesis_file;
    auto* verify_cmd = app.add_subcommand("verify", "Verify a hypothesis against the chronicle");
    verify_cmd->add_option("--hypothesis", hypothesis_file, "Hypothesis JSON")->required();

    auto* model_cmd = app.add_subcommand("model", "Build or show the personal food model");
    model_cmd->require_subcommand(1);
    auto* model_build = model_cmd->add_subcommand("build", "Personalize the rule base and save the model");
    auto* model_show = model_cmd->add_subcommand("show", "Print the saved model");

    std::string request_file;
    auto* recommend_cmd = app.add_subcommand("recommend", "Rank candidate dishes");
    recommend_cmd->add_option("--request", request_file, "Recommendation request JSON")->required();

    std::string substitutes_file;
    auto* substitutes_cmd = app.add_subcommand("substitutes", "Same-taste, healthier alternatives");
    substitutes_cmd->add_option("--request", substitutes_file, "{target, candidates, health_key, k}")->required();

    std::string profile_file;
    auto* profile_cmd = app.add_subcommand("profile", "Show or replace static constraints (allergies, intolerances)");
    profile_cmd->add_option("--set", profile_file, "Profile JSON {constraints: [...]}");

    std::string synth_spec;
    std::string synth_out;
    std::string synth_truth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic chronicle with planted effects");
    synth_cmd->add_option("--spec", synth_spec, "Synth spec JSON (default spec if omitted)");
    synth_cmd->add_option("--out", synth_out, "Chronicle JSONL output")->required();
    synth_cmd->add_option("--truth", synth_truth, "Ground-truth JSON output")->required();

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string ui_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port (0 = any free port)");
    serve_cmd->add_option("--ui-dir", ui_dir, "Static files served under /ui");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        if (*synth_cmd) {
            SynthSpec spec = synth_spec.empty() ? default_synth_spec() : synth_spec_from_json(read_json_file(synth_spec));
            if (g.seed) spec.seed = *g.seed;
            if (const auto problems = validate(spec); !problems.empty()) fail(ErrorCode::SchemaError, problems.front());
            const auto result = generate(spec);
            write_text_file(synth_out, export_jsonl(result.chronicle));
            write_text_file(synth_truth, canonical_line(to_json(result.truth, spec)));
            out << canonical_line(Json{{"events", result.chronicle.size()}, {"out", synth_out}, {"truth", synth_truth},
                                       {"user_id", spec.user_id}});
            return 0;
        }
        if (*serve_cmd) return serve(g, host, port, ui_dir, out);

        Engine engine(engine_options(g));
        if (*import_cmd) {
            out << canonical_line(engine.import_chronicle(import_jsonl_file(import_file)));
        } else if (*export_cmd) {
            const std::string user = pick_user(g, engine);
            if (g.json) {
                out << canonical_line(engine.export_user(user));
            } else {
                export_jsonl(engine.store().load_enriched(user), out);
            }
        } else if (*enrich_cmd) {
            out << canonical_line(engine.enrich(pick_user(g, engine)));
        } else if (*heatmap_cmd) {
            const std::string user = pick_user(g, engine);
            const auto window = parse_duration_minutes(hm_window);
            if (g.json && !hm_csv) {
                out << canonical_line(engine.heatmap(user, hm_a, hm_b, window, hm_support));
            } else {
                out << to_csv(engine.heatmap_matrix(user, hm_a, hm_b, window));
            }
        } else if (*verify_cmd) {
            const Json result = engine.verify(pick_user(g, engine), read_json_file(hypothesis_file));
            if (!g.json) print_verify_table(verified_rule_from_json(result), out);
            out << canonical_line(result);
        } else if (*model_build) {
            out << canonical_line(engine.build_model(pick_user(g, engine)));
        } else if (*model_show) {
            out << canonical_line(engine.show_model(pick_user(g, engine)));
        } else if (*recommend_cmd) {
            const Json request = read_json_file(request_file);
            std::string user = g.user;
            if (user.empty() && request.is_object() && request.contains("user_id")) user = request["user_id"].get<std::string>();
            Globals scoped = g;
            scoped.user = user;
            out << canonical_line(engine.recommend(pick_user(scoped, engine), request));
        } else if (*profile_cmd) {
            const std::string user = g.user.empty() ? pick_user(g, engine) : g.user;
            out << canonical_line(profile_file.empty() ? engine.profile(user)
                                                       : engine.set_profile(user, read_json_file(profile_file)));
        } else if (*substitutes_cmd) {
            out << canonical_line(engine.substitutes(pick_user(g, engine), read_json_file(substitutes_file)));
        }
        return 0;
    } catch (const Error& e) {
        err << "pfm: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const Json::exception& e) {
        err << "pfm: SchemaError: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "pfm: error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace pfm
