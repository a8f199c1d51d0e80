// Command-line front end; talks to the library exclusively through the C API.
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vmd/vmd.h"

namespace {

int finish(vmd_status rc) {
    if (rc != VMD_OK) {
        std::fprintf(stderr, "error: %s\n", vmd_last_error());
    }
    return static_cast<int>(rc);
}

void print_owned(char* json_or_null, const char* text_field = nullptr) {
    if (!json_or_null) return;
    if (text_field) {
        try {
            auto j = nlohmann::json::parse(json_or_null);
            if (j.contains(text_field)) {
                std::fputs(j[text_field].get<std::string>().c_str(), stdout);
                vmd_string_free(json_or_null);
                return;
            }
        } catch (...) {
            // fall through to raw print
        }
    }
    std::fputs(json_or_null, stdout);
    std::fputc('\n', stdout);
    vmd_string_free(json_or_null);
}

std::string join_overrides(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ";";
        out += p;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vmd: student-teacher-expert variational multimodal distillation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(vmd_version()));

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic multimodal dataset");
    std::string synth_out;
    synth->add_option("--out", synth_out, "output JSONL path")->required();
    std::optional<uint64_t> n, feature_dim, report_dim, signal_dims, mask_noise_dims, synth_seed;
    std::optional<double> class_balance, noise_scale;
    synth->add_option("--n", n, "number of samples");
    synth->add_option("--feature-dim", feature_dim, "image-like feature width");
    synth->add_option("--report-dim", report_dim, "report embedding width");
    synth->add_option("--signal-dims", signal_dims, "class-informative dims");
    synth->add_option("--mask-noise-dims", mask_noise_dims, "dims zeroed by the mask");
    synth->add_option("--class-balance", class_balance, "fraction labeled vulnerable");
    synth->add_option("--noise-scale", noise_scale, "noise level");
    synth->add_option("--seed", synth_seed, "generator seed");

    // train
    auto* train = app.add_subcommand("train", "train a model (writes log + checkpoint)");
    std::string train_config, train_data, train_out, train_sets;
    bool paper_scale = false;
    std::vector<std::string> train_overrides;
    train->add_option("--config", train_config, "config file");
    train->add_option("--data", train_data, "dataset JSONL")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_flag("--paper-scale", paper_scale, "400 epochs, latent size 512");
    train->add_option("--set", train_overrides, "config override key=value (repeatable)");

    // eval
    auto* eval = app.add_subcommand("eval", "score a checkpoint on a split");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_branch = "student", eval_out;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset JSONL")->required();
    eval->add_option("--split", eval_split, "train|val|test|all");
    eval->add_option("--branch", eval_branch, "student|teacher");
    eval->add_option("--out", eval_out, "output directory (optional)");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the guidance ablation grid");
    std::string abl_config, abl_data, abl_out, abl_seeds = "1,2,3,4,5";
    int abl_jobs = 2;
    bool assert_trends = false;
    std::vector<std::string> abl_overrides;
    ablate->add_option("--config", abl_config, "config file");
    ablate->add_option("--data", abl_data, "dataset JSONL")->required();
    ablate->add_option("--out", abl_out, "output directory")->required();
    ablate->add_option("--seeds", abl_seeds, "comma-separated seeds");
    ablate->add_option("--jobs", abl_jobs, "worker pool size");
    ablate->add_flag("--assert-trends", assert_trends,
                     "exit 4 unless the guidance trends hold");
    ablate->add_option("--set", abl_overrides, "config override key=value (repeatable)");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    std::string gc_op;
    gradcheck->add_option("--op", gc_op, "check a single op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (synth->parsed()) {
        std::vector<std::string> ov;
        if (n) ov.push_back("n_samples=" + std::to_string(*n));
        if (feature_dim) ov.push_back("feature_dim=" + std::to_string(*feature_dim));
        if (report_dim) ov.push_back("report_dim=" + std::to_string(*report_dim));
        if (signal_dims) ov.push_back("signal_dims=" + std::to_string(*signal_dims));
        if (mask_noise_dims) ov.push_back("mask_noise_dims=" + std::to_string(*mask_noise_dims));
        if (class_balance) ov.push_back("class_balance=" + std::to_string(*class_balance));
        if (noise_scale) ov.push_back("noise_scale=" + std::to_string(*noise_scale));
        if (synth_seed) ov.push_back("seed=" + std::to_string(*synth_seed));
        char* summary = nullptr;
        vmd_status rc = vmd_synth_run(join_overrides(ov).c_str(), synth_out.c_str(), &summary);
        if (rc == VMD_OK) print_owned(summary);
        return finish(rc);
    }

    if (train->parsed()) {
        std::vector<std::string> ov = train_overrides;
        if (paper_scale) ov.push_back("paper_scale=true");
        char* summary = nullptr;
        vmd_status rc = vmd_train_run(train_config.empty() ? nullptr : train_config.c_str(),
                                      join_overrides(ov).c_str(), train_data.c_str(),
                                      train_out.c_str(), &summary);
        if (rc == VMD_OK) print_owned(summary);
        return finish(rc);
    }

    if (eval->parsed()) {
        char* report = nullptr;
        vmd_status rc = vmd_eval_run(eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(),
                                     eval_branch.c_str(),
                                     eval_out.empty() ? nullptr : eval_out.c_str(), &report);
        if (rc == VMD_OK) print_owned(report);
        return finish(rc);
    }

    if (ablate->parsed()) {
        char* table = nullptr;
        vmd_status rc = vmd_ablate_run(abl_config.empty() ? nullptr : abl_config.c_str(),
                                       join_overrides(abl_overrides).c_str(), abl_data.c_str(),
                                       abl_seeds.c_str(), assert_trends ? 1 : 0, abl_jobs,
                                       abl_out.c_str(), &table);
        // the table is worth showing even when the trend assertion fails
        print_owned(table, "table_text");
        return finish(rc);
    }

    if (gradcheck->parsed()) {
        char* report = nullptr;
        vmd_status rc = vmd_gradcheck_run(gc_op.empty() ? nullptr : gc_op.c_str(), &report);
        print_owned(report, "text");
        return finish(rc);
    }

    return 1;
}
