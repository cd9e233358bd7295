#include "compactml/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <unistd.h>

#include "compactml/automl.hpp"
#include "compactml/dataset.hpp"
#include "compactml/error.hpp"
#include "compactml/importance.hpp"
#include "compactml/report.hpp"
#include "compactml/run_store.hpp"

namespace fs = std::filesystem;

namespace compactml::cli {
namespace {

struct TrainArgs {
    std::string data;
    std::string target;
    int config = 0;
    std::uint64_t seed = 0;
    std::string out;
    double test_frac = 0.2;
    std::size_t folds = 5;
    std::optional<double> time_budget;
};

struct ModelArgs {
    std::string run;
    std::string model;
    std::string input;
    std::string output;
    std::size_t n = kDefaultImportanceRepeats;
    std::optional<std::uint64_t> seed;
};

std::string available(const RunDirectory& dir) {
    std::string s;
    for (const auto& n : dir.model_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
}

// Throws ConfigError naming the available models when name is unknown.
void require_model(const RunDirectory& dir, const std::string& name) {
    if (!dir.has_model(name))
        throw ConfigError("unknown model '" + name + "'; available: " + available(dir));
}

std::vector<ImportanceRow> compute_importance(const RunDirectory& dir, const std::string& model,
                                              std::size_t n, std::uint64_t seed) {
    return permutation_importance(dir.load_predictor(model), dir.test(), n, seed);
}

void write_importance(const fs::path& dir, const std::string& model, std::uint64_t seed,
                      const std::vector<ImportanceRow>& rows) {
    write_file_atomic(dir / run_files::kImportance, importance_tsv(rows));
    write_file_atomic(dir / run_files::kImportanceDrops,
                      importance_drops_json(model, seed, rows).dump(2) + "\n");
}

void write_reports(const RunDirectory& dir, const std::string& model) {
    const auto predict = dir.load_predictor(model);
    const auto train = dir.train();
    const auto test = dir.test();
    const auto train_series =
        make_report_series(SeriesSplit::train, train.targets(), predict(train.features()));
    const auto test_series =
        make_report_series(SeriesSplit::test, test.targets(), predict(test.features()));
    write_file_atomic(dir.path() / run_files::kReportTrain, report_csv(train_series));
    write_file_atomic(dir.path() / run_files::kReportTest, report_csv(test_series));
}

int cmd_train(const TrainArgs& a, const nlohmann::json& effective, std::ostream& out) {
    auto config = RunConfig::for_number(a.config, a.seed);
    config.test_fraction = a.test_frac;
    config.n_folds = a.folds;
    config.time_budget_s = a.time_budget;
    config.validate();

    const auto ds = load_csv(a.data, parse_target(a.target));
    const auto result = run(config, ds);

    auto manifest = result.manifest.to_json();
    manifest["cli"] = effective;
    manifest["data_path"] = a.data;

    const fs::path out_dir(a.out);
    const fs::path staging = out_dir.string() + ".staging-" + std::to_string(::getpid());
    fs::remove_all(staging);
    if (!result.leaderboard.empty()) {
        const auto& top = result.leaderboard.front().model_name;
        manifest["importance"] = {{"model", top},
                                  {"eval_split", "test"},
                                  {"n", kDefaultImportanceRepeats},
                                  {"seed", a.seed}};
        manifest["report"] = {{"model", top}};
    }
    try {
        write_run_contents(result, manifest, staging);
        if (!result.leaderboard.empty()) {
            const RunDirectory dir(staging);
            const auto& top = result.leaderboard.front().model_name;
            write_importance(staging, top, a.seed,
                             compute_importance(dir, top, kDefaultImportanceRepeats, a.seed));
            write_reports(dir, top);
        }
        commit_directory(staging, out_dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }

    out << leaderboard_table(result.leaderboard);
    if (result.manifest.removed_duplicates > 0)
        out << "# removed " << result.manifest.removed_duplicates << " duplicate rows\n";
    if (result.leaderboard.empty()) return kExitAllFailed;
    return kExitOk;
}

int cmd_predict(const ModelArgs& a, std::ostream&) {
    const RunDirectory dir(a.run);
    require_model(dir, a.model);
    const auto table = load_feature_csv(a.input);
    const auto pred = dir.load_predictor(a.model)(table.features);
    std::string csv = table.header + ",prediction\n";
    for (std::size_t i = 0; i < table.lines.size(); ++i)
        csv += table.lines[i] + ',' + format_number(pred[i]) + '\n';
    const fs::path output(a.output);
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    write_file_atomic(output, csv);
    return kExitOk;
}

int cmd_importance(const ModelArgs& a, std::ostream& out) {
    if (a.n < 2) throw ConfigError("--n must be >= 2");
    const RunDirectory dir(a.run);
    require_model(dir, a.model);
    const auto seed = a.seed.value_or(dir.seed());
    const auto rows = compute_importance(dir, a.model, a.n, seed);
    write_importance(dir.path(), a.model, seed, rows);
    out << importance_tsv(rows);
    return kExitOk;
}

int cmd_report(const ModelArgs& a, std::ostream& out) {
    const RunDirectory dir(a.run);
    require_model(dir, a.model);
    write_reports(dir, a.model);
    out << "wrote " << (dir.path() / run_files::kReportTrain).string() << " and "
        << (dir.path() / run_files::kReportTest).string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"compactml: AutoML for soil compaction regression"};
    app.set_config("--config-file", "", "TOML/INI file supplying any flag; explicit flags win");
    app.require_subcommand(1);

    TrainArgs t;
    auto* train = app.add_subcommand("train", "train the model zoo and write a run directory");
    train->add_option("--data", t.data, "soil CSV (LL, PL, G, S, F, OMC, MDD)")->required();
    train->add_option("--target", t.target, "omc or mdd")->required()
        ->check(CLI::IsMember({"omc", "mdd"}, CLI::ignore_case));
    train->add_option("--config", t.config, "configuration 1..4")->required()->check(CLI::Range(1, 4));
    train->add_option("--seed", t.seed, "split and model seed")->required();
    train->add_option("--out", t.out, "run directory to create")->required();
    train->add_option("--test-frac", t.test_frac, "test fraction")->capture_default_str();
    train->add_option("--folds", t.folds, "bagging folds")->capture_default_str();
    train->add_option("--time-budget", t.time_budget, "advisory budget in seconds");

    ModelArgs p;
    auto* predict = app.add_subcommand("predict", "predict a feature CSV with a stored model");
    predict->add_option("--run", p.run)->required();
    predict->add_option("--model", p.model)->required();
    predict->add_option("--input", p.input)->required();
    predict->add_option("--output", p.output)->required();

    ModelArgs im;
    auto* importance = app.add_subcommand("importance", "permutation importance on the test split");
    importance->add_option("--run", im.run)->required();
    importance->add_option("--model", im.model)->required();
    importance->add_option("--n", im.n, "shuffles per feature")->capture_default_str();
    importance->add_option("--seed", im.seed, "shuffle seed (defaults to the run seed)");

    ModelArgs rp;
    auto* report = app.add_subcommand("report", "actual/predicted/error series for plotting");
    report->add_option("--run", rp.run)->required();
    report->add_option("--model", rp.model)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*train) {
            nlohmann::json effective{{"data", t.data},           {"target", t.target},
                                     {"config", t.config},       {"seed", t.seed},
                                     {"out", t.out},             {"test_frac", t.test_frac},
                                     {"folds", t.folds}};
            effective["time_budget"] = t.time_budget ? nlohmann::json(*t.time_budget) : nlohmann::json();
            return cmd_train(t, effective, out);
        }
        if (*predict) return cmd_predict(p, out);
        if (*importance) return cmd_importance(im, out);
        if (*report) return cmd_report(rp, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace compactml::cli
