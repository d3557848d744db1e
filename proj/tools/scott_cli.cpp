// Command-line harness: dataset generation, experiment runs, grid search
// and the self-verification suite.
//
// Exit codes: 0 success, 1 configuration error, 2 optimizer divergence,
// 3 verification failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scott/harness.hpp"
#include "scott/verify.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitVerify = 3;

int cmd_gen(const std::string& spec, const std::string& out_path) {
    scott::LoadedDataset loaded = scott::make_dataset(spec, 0);
    scott::write_csv(loaded.ds, out_path);
    const auto examples = scott::extract_examples(loaded.ds);
    std::cerr << "wrote " << out_path << ": " << loaded.ds.series.size()
              << " series, " << examples.size() << " training examples\n";
    if (!loaded.labels.empty()) {
        scott::write_labels(loaded.labels, out_path + ".labels");
        std::cerr << "wrote " << out_path << ".labels (ground-truth strata)\n";
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            bool keep_wall_clock) {
    const scott::RunConfig cfg = scott::parse_config_file(config_path);
    scott::RunResult result = scott::run(cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    scott::emit_csv(result.records, out_path, keep_wall_clock);
    const auto& last = result.records.back();
    std::cerr << "run: " << result.evals << " gradient evals, final train loss "
              << last.train_loss;
    if (last.test_loss) std::cerr << ", test loss " << *last.test_loss;
    if (last.wall_ms) std::cerr << " (" << *last.wall_ms << " ms)";
    std::cerr << "\n";
    if (result.diverged) {
        std::cerr << "error: optimizer diverged; partial records written\n";
        return kExitDivergence;
    }
    return 0;
}

struct GridSpec {
    std::vector<std::string> optimizers;
    std::vector<double> alphas;
    std::vector<double> gammas;
};

GridSpec parse_grid_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw scott::ConfigError("cannot open grid spec '" + path + "'");
    GridSpec spec;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = scott::detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw scott::ConfigError("grid spec line " + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = scott::detail::trim(s.substr(0, eq));
        std::stringstream values(s.substr(eq + 1));
        std::string item;
        while (std::getline(values, item, ',')) {
            item = scott::detail::trim(item);
            if (item.empty()) continue;
            if (key == "optimizers") spec.optimizers.push_back(item);
            else if (key == "alpha") spec.alphas.push_back(scott::detail::parse_double(item, key));
            else if (key == "gamma") spec.gammas.push_back(scott::detail::parse_double(item, key));
            else throw scott::ConfigError("grid spec line " + std::to_string(line_no) +
                                          ": unknown key '" + key + "'");
        }
    }
    if (spec.alphas.empty())
        throw scott::ConfigError("grid spec '" + path + "': needs an alpha grid");
    return spec;
}

int cmd_grid(const std::string& config_path, const std::string& grid_path,
             const std::string& out_dir) {
    const scott::RunConfig base = scott::parse_config_file(config_path);
    GridSpec spec = parse_grid_spec(grid_path);
    if (spec.optimizers.empty()) spec.optimizers.push_back(base.optimizer);

    std::filesystem::create_directories(out_dir);
    std::ofstream summary(out_dir + "/summary.csv");
    if (!summary)
        throw std::runtime_error("cannot open " + out_dir + "/summary.csv for writing");
    summary << "optimizer,alpha,gamma,final_train_loss,status\n";

    auto on_row = [&](const scott::GridRow& row) {
        summary << row.optimizer << ',' << scott::detail::fmt17(row.alpha) << ',';
        if (row.gamma) summary << scott::detail::fmt17(*row.gamma);
        summary << ',';
        if (!row.diverged) summary << scott::detail::fmt17(row.final_train_loss);
        summary << ',' << (row.diverged ? "diverged" : "ok") << '\n';
        std::cerr << "grid: " << row.optimizer << " alpha=" << row.alpha;
        if (row.gamma) std::cerr << " gamma=" << *row.gamma;
        if (row.diverged) std::cerr << " diverged\n";
        else std::cerr << " final train loss " << row.final_train_loss << "\n";
    };

    const scott::GridResult result =
        scott::grid_search(base, spec.optimizers, spec.alphas, spec.gammas, on_row);
    for (const auto& [opt, row] : result.best) {
        std::cout << "best " << opt << ": alpha=" << row.alpha;
        if (row.gamma) std::cout << " gamma=" << *row.gamma;
        std::cout << " final train loss " << row.final_train_loss << "\n";
    }
    return 0;
}

int cmd_verify() {
    const auto checks = scott::verify::run_all();
    bool all_pass = true;
    for (const auto& c : checks) {
        std::printf("%s  %s (%s)\n", c.pass ? "[PASS]" : "[FAIL]", c.name.c_str(),
                    c.detail.c_str());
        all_pass = all_pass && c.pass;
    }
    std::printf("%s\n", all_pass ? "verification passed" : "verification FAILED");
    return all_pass ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stratified-sampling variance reduction for forecasting-model training"};
    app.require_subcommand(1);

    std::string gen_spec, gen_out;
    auto* gen = app.add_subcommand("gen", "generate a dataset as CSV (+ label sidecar)");
    gen->add_option("spec", gen_spec, "dataset spec, e.g. synth4:200:1")->required();
    gen->add_option("out", gen_out, "output CSV path")->required();

    std::string run_config, run_out;
    bool wall_clock = false;
    auto* run = app.add_subcommand("run", "execute one configured training run");
    run->add_option("config", run_config, "key = value config file")->required();
    run->add_option("out", run_out, "output convergence CSV")->required();
    run->add_flag("--wall-clock", wall_clock,
                  "emit measured wall_ms (breaks byte-for-byte reproducibility)");

    std::string grid_config, grid_spec, grid_out;
    auto* grid = app.add_subcommand("grid", "grid search over step sizes / optimizers");
    grid->add_option("config", grid_config, "base config file")->required();
    grid->add_option("gridspec", grid_spec, "grid file: alpha/gamma/optimizers lists")->required();
    grid->add_option("outdir", grid_out, "directory for summary.csv")->required();

    auto* verify = app.add_subcommand("verify", "run the oracle self-check suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfig : 0;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_spec, gen_out);
        if (run->parsed()) return cmd_run(run_config, run_out, wall_clock);
        if (grid->parsed()) return cmd_grid(grid_config, grid_spec, grid_out);
        if (verify->parsed()) return cmd_verify();
    } catch (const scott::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
