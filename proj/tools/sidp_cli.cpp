#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sidp/commands.hpp"
#include "sidp/exit_codes.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> weight_mode;
    std::optional<double> tau;
    bool no_goal_agnostic = false;
    bool no_curriculum = false;
    std::optional<std::string> sampler;
    std::optional<int> steps;
    std::optional<std::string> mode;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
};

sidp::ExperimentConfig effective_config(const Options& o) {
    sidp::ExperimentConfig cfg = o.config.empty() ? sidp::ExperimentConfig{} : sidp::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.weight_mode) cfg.sidp.weight_mode = sidp::weight_mode_from_string(*o.weight_mode);
    if (o.tau) cfg.sidp.temperature = *o.tau;
    if (o.no_goal_agnostic) cfg.sidp.goal_agnostic_fraction = 0.0;
    if (o.no_curriculum) cfg.sidp.curriculum = false;
    if (o.sampler) cfg.eval.sampler.kind = sidp::sampler_kind_from_string(*o.sampler);
    if (o.steps) cfg.eval.sampler.steps = *o.steps;
    if (o.mode) cfg.eval.mode = sidp::eval_mode_from_string(*o.mode);
    cfg.validate();
    return cfg;
}

void print_metrics(const sidp::MetricsReport& m) {
    std::cout << "SR " << m.sr << "  SPL " << m.spl << "  CR " << m.cr << "  DTG " << m.dtg;
    if (m.ea) std::cout << "  EA " << *m.ea;
    std::cout << "  (" << m.episodes << " episodes)\n";
}

int run(const std::string& command, const Options& o) {
    const auto cfg = effective_config(o);
    const auto out = sidp::resolve_output_dir(cfg, o.out);
    if (command == "gen-scenes") {
        const auto r = sidp::cmd_gen_scenes(cfg, out);
        std::cout << "wrote " << r.files.size() << " scenes, manifest " << r.manifest.string() << "\n";
    } else if (command == "pretrain") {
        const auto r = sidp::cmd_pretrain(cfg, out);
        std::cout << "val loss " << r.rows.front().val_loss << " -> " << r.rows.back().val_loss << "\n"
                  << "checkpoint " << r.checkpoint.string() << "\nlog " << r.log.string() << "\n";
    } else if (command == "train") {
        const auto init = o.checkpoint ? std::filesystem::path(*o.checkpoint) : out / "pretrain.ckpt";
        const auto r = sidp::cmd_train(cfg, init, out);
        if (!r.rows.empty()) std::cout << "final mean reward " << r.rows.back().mean_reward << "\n";
        std::cout << "checkpoint " << r.checkpoint.string() << "\nlog " << r.log.string() << "\n";
    } else if (command == "eval") {
        const auto ck = o.checkpoint ? std::filesystem::path(*o.checkpoint) : out / "sidp.ckpt";
        const auto r = sidp::cmd_eval(cfg, ck, out);
        print_metrics(r.suite.metrics);
        std::cout << "report " << r.report_json.string() << "\n";
    } else {
        const auto ck = o.checkpoint ? std::filesystem::path(*o.checkpoint) : out / "sidp.ckpt";
        const auto r = sidp::cmd_bench(cfg, ck, out);
        for (const auto& row : r.rows) {
            std::cout << sidp::to_string(row.sampler.kind) << "-" << row.sampler.steps << "  calls "
                      << row.denoiser_calls << "  " << row.mean_ms << " ms";
            if (row.sr) std::cout << "  SR " << *row.sr;
            std::cout << "\n";
        }
        std::cout << "table " << r.table.string() << "\n";
    }
    return sidp::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-imitation diffusion planner: scenes, pretraining, training, evaluation, benchmarks"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "Experiment config (JSON)");
    app.add_option("--seed", o.seed, "Global seed");
    app.add_option("--weight-mode", o.weight_mode, "Candidate weighting")->check(CLI::IsMember({"softmax", "linear"}));
    app.add_option("--tau", o.tau, "Softmax temperature");
    app.add_flag("--no-goal-agnostic", o.no_goal_agnostic, "Train without goal-agnostic scenarios");
    app.add_flag("--no-curriculum", o.no_curriculum, "Disable the reward gate");
    app.add_option("--sampler", o.sampler, "Evaluation sampler")->check(CLI::IsMember({"ddpm", "ddim"}));
    app.add_option("--steps", o.steps, "Evaluation denoising steps");
    app.add_option("--mode", o.mode, "Evaluation suite")
        ->check(CLI::IsMember({"closed_loop", "one_shot", "goal_agnostic"}));
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--checkpoint", o.checkpoint, "Input checkpoint for train/eval/bench");
    for (const char* name : {"gen-scenes", "pretrain", "train", "eval", "bench"}) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? sidp::kExitOk : sidp::kExitConfig;
    }

    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const std::exception& e) {
        const auto code = sidp::exit_code_for(e);
        std::cerr << sidp::exit_label(code) << ": " << e.what() << "\n";
        return code;
    }
}
