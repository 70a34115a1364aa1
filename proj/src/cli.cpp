#include "mhke/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mhke/case_library.hpp"
#include "mhke/controller.hpp"
#include "mhke/eval.hpp"
#include "mhke/run_config.hpp"

namespace mhke {

namespace {

BatchSetting parse_setting(const std::string& s) {
    if (s == "1") return BatchSetting::OneEdited;
    if (s == "100") return BatchSetting::HundredEdited;
    if (s == "all") return BatchSetting::AllEdited;
    throw ConfigError("unknown --setting value: " + s + " (expected 1, 100 or all)");
}

std::vector<FactEdit> load_edits_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open edits file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid edits JSON in " + path.string() + ": " + e.what());
    }
    try {
        return j.get<std::vector<FactEdit>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("edits file does not hold FactEdit objects: " + std::string(e.what()));
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out << content;
}

/// Gold-trace record for library seeding without any LLM involvement: one
/// step per chain hop, subquestions taken from the matching edit when the
/// hop is edited.
CaseRecord oracle_record(const EvalCase& eval_case) {
    CaseRecord record;
    record.question = eval_case.questions.front();
    record.succeeded = true;
    for (const auto& triple : eval_case.gold_chain) {
        DecompositionStep step;
        step.answer = triple.object;
        const FactEdit* matched = nullptr;
        for (const auto& edit : eval_case.edits) {
            if (normalize_entity(edit.subject) == normalize_entity(triple.subject) &&
                normalize_entity(edit.relation) == normalize_entity(triple.relation)) {
                matched = &edit;
                break;
            }
        }
        if (matched) {
            step.subquestion = matched->atomic_question;
            step.retrieved_edit = *matched;
        } else {
            step.subquestion = "What is the " + triple.relation + " of " + triple.subject + "?";
        }
        record.steps.push_back(std::move(step));
    }
    record.final_answer = record.steps.back().answer;
    return record;
}

/// All flags shared by the subcommands, with CLI11 option handles so that
/// flag > config file > default precedence can be applied after parsing.
struct CommonFlags {
    std::string config_path;
    std::string prompts_dir;
    std::string dataset;
    std::string library_path;
    std::string rules_path;
    std::string report_path;
    double theta = 0.0;
    double tau = 0.0;
    int pre_n = 0;
    int max_hops = 0;
    int max_backtracks = 0;
    std::string payload;
    bool no_fact_guidance = false;
    bool no_case_guidance = false;
    bool no_backtrack = false;
    bool offline = false;
    bool random_case = false;
    int parallel = 1;
    std::uint64_t seed = 0;

    CLI::Option* theta_opt = nullptr;
    CLI::Option* tau_opt = nullptr;
    CLI::Option* pre_n_opt = nullptr;
    CLI::Option* max_hops_opt = nullptr;
    CLI::Option* max_backtracks_opt = nullptr;
    CLI::Option* payload_opt = nullptr;
    CLI::Option* offline_opt = nullptr;
    CLI::Option* prompts_opt = nullptr;
    CLI::Option* dataset_opt = nullptr;
    CLI::Option* library_opt = nullptr;
    CLI::Option* rules_opt = nullptr;
    CLI::Option* report_opt = nullptr;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run-config file");
        prompts_opt = cmd->add_option("--prompts", prompts_dir, "prompt template directory");
        dataset_opt = cmd->add_option("--dataset", dataset, "MQuAKE-style dataset JSON");
        library_opt = cmd->add_option("--library", library_path, "case library JSON");
        rules_opt = cmd->add_option("--rules", rules_path, "scripted backend rules JSON");
        report_opt = cmd->add_option("--report", report_path, "report output base path");
        theta_opt = cmd->add_option("--theta", theta, "case-similarity threshold");
        tau_opt = cmd->add_option("--tau", tau, "precise-retrieval threshold");
        pre_n_opt = cmd->add_option("--pre-n", pre_n, "pre-retrieval candidate count");
        max_hops_opt = cmd->add_option("--max-hops", max_hops, "hop budget per solve");
        max_backtracks_opt =
            cmd->add_option("--max-backtracks", max_backtracks, "pop budget per solve");
        payload_opt = cmd->add_option("--guidance-payload", payload,
                                      "guidance payload: question|fact");
        cmd->add_flag("--no-fact-guidance", no_fact_guidance, "disable fact-level guidance");
        cmd->add_flag("--no-case-guidance", no_case_guidance, "disable case-level guidance");
        cmd->add_flag("--no-backtrack", no_backtrack, "disable state backtracking");
        cmd->add_flag("--random-case", random_case, "pick a random case instead of the argmax");
        offline_opt = cmd->add_flag("--offline", offline, "deterministic offline backends");
        cmd->add_option("--parallel", parallel, "worker threads for eval");
        seed_opt = cmd->add_option("--seed", seed, "RNG seed");
    }

    RunConfig resolve() const {
        RunConfig config;
        if (!config_path.empty()) config = RunConfig::load_file(config_path);

        if (theta_opt->count()) config.engine.case_similarity_threshold = theta;
        if (tau_opt->count()) config.engine.precise_retrieval_threshold = tau;
        if (pre_n_opt->count()) config.engine.pre_retrieval_n = pre_n;
        if (max_hops_opt->count()) config.engine.max_hops = max_hops;
        if (max_backtracks_opt->count()) config.engine.max_backtracks = max_backtracks;
        if (no_fact_guidance) config.engine.fact_guidance_enabled = false;
        if (no_case_guidance) config.engine.case_guidance_enabled = false;
        if (no_backtrack) config.engine.backtracking_enabled = false;
        if (random_case) config.engine.random_case_selection = true;
        if (seed_opt->count()) config.engine.random_case_seed = seed;
        if (payload_opt->count()) {
            if (payload == "question") {
                config.engine.guidance_payload = GuidancePayload::Question;
            } else if (payload == "fact" || payload == "fact_statement") {
                config.engine.guidance_payload = GuidancePayload::FactStatement;
            } else {
                throw ConfigError("unknown --guidance-payload: " + payload);
            }
        }
        if (offline_opt->count()) config.backends.offline = true;
        if (prompts_opt->count()) config.paths.prompts_dir = prompts_dir;
        if (dataset_opt->count()) config.paths.dataset = dataset;
        if (library_opt->count()) config.paths.case_library = library_path;
        if (rules_opt->count()) config.backends.scripted_rules = rules_path;
        if (report_opt->count()) config.paths.report_out = report_path;
        config.engine.validate();
        return config;
    }
};

std::optional<CaseLibrary> maybe_load_library(const RunConfig& config,
                                              const std::shared_ptr<Embedder>& embedder) {
    if (config.paths.case_library.empty()) return std::nullopt;
    auto library = CaseLibrary::load_file(embedder, config.paths.case_library);
    library.set_frozen(true);  // eval runs stay deterministic and comparable
    return library;
}

int cmd_solve(const CommonFlags& flags, const std::string& question,
              const std::string& edits_path, const std::string& case_id,
              const std::string& trace_path, bool append_library) {
    const RunConfig config = flags.resolve();
    Runtime runtime = make_runtime(config);

    EditedFactMemory memory(runtime.fact_embedder);
    if (!edits_path.empty()) {
        for (const auto& edit : load_edits_file(edits_path)) memory.insert(edit);
    } else if (!config.paths.dataset.empty() && !case_id.empty()) {
        const auto cases = load_dataset(config.paths.dataset);
        auto it = std::find_if(cases.begin(), cases.end(),
                               [&](const EvalCase& c) { return c.case_id == case_id; });
        if (it == cases.end()) throw ConfigError("case id not found in dataset: " + case_id);
        for (const auto& edit : it->edits) memory.insert(edit);
    } else {
        throw ConfigError("solve needs an edit source: --edits FILE, or --dataset with --case-id");
    }

    auto library = maybe_load_library(config, runtime.case_embedder);
    if (library && append_library) library->set_frozen(false);

    SolveContext ctx;
    ctx.memory = &memory;
    ctx.library = library ? &*library : nullptr;
    ctx.backend = runtime.backend.get();
    ctx.templates = &runtime.templates;

    const SolveResult result = solve(question, ctx, config.engine);
    std::cout << result.final_answer << "\n";

    if (library && append_library && !result.truncated) {
        CaseRecord record{question, result.trace, result.final_answer, true};
        if (record.valid() && !record.steps.empty()) {
            library->append(record);
            library->save_file(config.paths.case_library);
        }
    }

    if (!trace_path.empty()) {
        nlohmann::json trace = solve_result_to_json(result);
        trace["config"] = config.to_json();
        write_text_file(trace_path, trace.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& setting_string) {
    const RunConfig config = flags.resolve();
    if (config.paths.dataset.empty()) {
        throw ConfigError("eval needs a dataset: --dataset FILE or paths.dataset in the config");
    }
    Runtime runtime = make_runtime(config);
    const auto cases = load_dataset(config.paths.dataset);
    auto library = maybe_load_library(config, runtime.case_embedder);

    EvalOptions options;
    options.setting = parse_setting(setting_string);
    options.config = config.engine;
    options.parallelism = flags.parallel;
    options.fact_embedder = runtime.fact_embedder;
    options.library = library ? &*library : nullptr;
    options.backend = runtime.backend.get();
    options.templates = &runtime.templates;

    EvalReport report = run_eval(cases, options);
    report.config_snapshot = config.to_json();
    report.config_snapshot["parallelism"] = flags.parallel;

    const std::string base = config.paths.report_out;
    write_text_file(base + ".json", report.to_json().dump(2) + "\n");
    write_text_file(base + ".csv", report.to_csv());
    std::cout << report.summary_line() << "\n";
    return kExitOk;
}

int cmd_build_library(const CommonFlags& flags, std::size_t sample_size,
                      const std::string& out_path) {
    const RunConfig config = flags.resolve();
    if (config.paths.dataset.empty()) {
        throw ConfigError("build-library needs a dataset: --dataset FILE or paths.dataset");
    }
    if (out_path.empty()) throw ConfigError("build-library needs --out FILE");

    Runtime runtime = make_runtime(config);
    const auto cases = load_dataset(config.paths.dataset);
    std::vector<CaseRecord> records;
    records.reserve(cases.size());
    for (const auto& eval_case : cases) records.push_back(oracle_record(eval_case));

    const CaseLibrary library =
        CaseLibrary::seed_from_cases(runtime.case_embedder, records, sample_size, flags.seed);
    library.save_file(out_path);
    std::cout << "wrote " << library.size() << " case records to " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Edited-fact memory, guided decomposition and evaluation for "
                 "multi-hop knowledge editing"};
    app.require_subcommand(1);

    CommonFlags solve_flags;
    std::string question;
    std::string edits_path;
    std::string case_id;
    std::string trace_path;
    bool append_library = false;
    auto* solve_cmd = app.add_subcommand("solve", "answer one multi-hop question");
    solve_cmd->add_option("question", question, "the multi-hop question")->required();
    solve_flags.attach(solve_cmd);
    solve_cmd->add_option("--edits", edits_path, "JSON file with the edits to load");
    solve_cmd->add_option("--case-id", case_id, "take the edits of this dataset case");
    solve_cmd->add_option("--trace", trace_path, "write the solve trace JSON here");
    solve_cmd->add_flag("--append-library", append_library,
                        "store a successful solve back into the case library");

    CommonFlags eval_flags;
    std::string setting_string = "all";
    auto* eval_cmd = app.add_subcommand("eval", "run a dataset evaluation");
    eval_flags.attach(eval_cmd);
    eval_cmd->add_option("--setting", setting_string, "batch setting: 1, 100 or all");

    CommonFlags build_flags;
    std::size_t sample_size = 500;
    std::string out_path;
    auto* build_cmd =
        app.add_subcommand("build-library", "seed a case library from gold dataset traces");
    build_flags.attach(build_cmd);
    build_cmd->add_option("--sample-size", sample_size, "number of cases to sample");
    build_cmd->add_option("--out", out_path, "output library JSON path")->required();

    std::vector<const char*> argv;
    argv.push_back("mhke");
    for (const auto& arg : args) argv.push_back(arg.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (solve_cmd->parsed()) {
            return cmd_solve(solve_flags, question, edits_path, case_id, trace_path,
                             append_library);
        }
        if (eval_cmd->parsed()) return cmd_eval(eval_flags, setting_string);
        if (build_cmd->parsed()) return cmd_build_library(build_flags, sample_size, out_path);
        std::cerr << "no subcommand given\n";
        return kExitConfig;
    } catch (const AbortedCaseError& e) {
        std::cerr << "aborted: " << e.what() << "\n";
        return kExitAborted;
    } catch (const BackendUnavailableError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace mhke
