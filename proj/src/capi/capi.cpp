#include "vmd/vmd.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eval/ablation.hpp"
#include "eval/gradcheck.hpp"
#include "eval/infer.hpp"
#include "eval/metrics.hpp"
#include "synth/synth.hpp"
#include "train/train.hpp"
#include "util/config.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_out(char** out, const ordered_json& j) {
    if (out) *out = dup_string(j.dump(2));
}

template <typename Fn>
vmd_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return VMD_OK;
    } catch (const vmd::UsageError& e) {
        g_last_error = e.what();
        return VMD_ERR_USAGE;
    } catch (const vmd::InvalidArgument& e) {
        g_last_error = e.what();
        return VMD_ERR_USAGE;
    } catch (const vmd::DimensionError& e) {
        g_last_error = e.what();
        return VMD_ERR_USAGE;
    } catch (const vmd::StateError& e) {
        g_last_error = e.what();
        return VMD_ERR_USAGE;
    } catch (const vmd::NumericError& e) {
        g_last_error = e.what();
        return VMD_ERR_NUMERIC;
    } catch (const vmd::AssertionError& e) {
        g_last_error = e.what();
        return VMD_ERR_ASSERTION;
    } catch (const vmd::IoError& e) {
        g_last_error = e.what();
        return VMD_ERR_IO;
    } catch (const vmd::ParseError& e) {
        g_last_error = e.what();
        return VMD_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VMD_ERR_INTERNAL;
    }
}

const char* require_arg(const char* v, const char* name) {
    if (!v || !*v) throw vmd::UsageError(std::string("missing required argument: ") + name);
    return v;
}

vmd::GeneratorSpec generator_spec_from(vmd::ConfigMap& cm) {
    vmd::GeneratorSpec spec;
    spec.n_samples = cm.get_u64("n_samples", spec.n_samples);
    spec.feature_dim = cm.get_u64("feature_dim", spec.feature_dim);
    spec.report_dim = cm.get_u64("report_dim", spec.report_dim);
    spec.signal_dims = cm.get_u64("signal_dims", spec.signal_dims);
    spec.mask_noise_dims = cm.get_u64("mask_noise_dims", spec.mask_noise_dims);
    spec.class_balance = cm.get_double("class_balance", spec.class_balance);
    spec.noise_scale = cm.get_double("noise_scale", spec.noise_scale);
    spec.seed = cm.get_u64("seed", spec.seed);
    cm.reject_unknown_keys();
    spec.validate();
    return spec;
}

vmd::TrainConfig load_train_config(const char* config_path, const char* overrides) {
    vmd::ConfigMap cm;
    if (config_path && *config_path) cm = vmd::ConfigMap::parse_file(config_path);
    if (overrides && *overrides) cm.apply_overrides(overrides);
    vmd::TrainConfig cfg = vmd::train_config_from(cm);
    cm.reject_unknown_keys();
    return cfg;
}

std::string fingerprint_hex(uint64_t fp) {
    std::ostringstream os;
    os << "0x" << std::hex << fp;
    return os.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw vmd::IoError("cannot write " + path.string());
    out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, ordered_json payload) {
    ordered_json m;
    m["tool"] = "vmd";
    m["version"] = kVersion;
    m["command"] = command;
    for (auto& [k, v] : payload.items()) m[k] = v;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

struct EvalSelection {
    std::vector<size_t> indices;
    vmd::Branch branch;
};

EvalSelection select_eval(const vmd::TrainConfig& cfg, const std::vector<vmd::Sample>& data,
                          const std::string& split_name, const std::string& branch_name_str) {
    vmd::SplitPlan plan = vmd::split(data, cfg.split);
    EvalSelection sel;
    if (split_name == "train") {
        sel.indices = plan.train_indices(cfg.fold);
    } else if (split_name == "val") {
        sel.indices = plan.val_indices(cfg.fold);
        if (sel.indices.empty()) {
            throw vmd::UsageError("this run has no validation split (k_folds == 1)");
        }
    } else if (split_name == "test") {
        sel.indices = plan.test;
    } else if (split_name == "all") {
        sel.indices.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) sel.indices[i] = i;
    } else {
        throw vmd::UsageError("split must be one of: train, val, test, all");
    }
    if (branch_name_str == "student") {
        sel.branch = vmd::Branch::Student;
    } else if (branch_name_str == "teacher") {
        sel.branch = vmd::Branch::Teacher;
    } else {
        throw vmd::UsageError("branch must be 'student' or 'teacher'");
    }
    return sel;
}

std::string metrics_text(const vmd::MetricReport& r) {
    std::ostringstream os;
    os << "n          " << r.n << "\n";
    if (r.roc_auc) {
        os << "roc_auc    " << *r.roc_auc << "\n";
    } else {
        os << "roc_auc    undefined (" << r.roc_error << ")\n";
    }
    os << "accuracy   " << r.accuracy << "\n"
       << "precision  " << r.precision << "\n"
       << "recall     " << r.recall << "\n"
       << "fbeta      " << r.fbeta << "\n"
       << "confusion  tp=" << r.tp << " fp=" << r.fp << " fn=" << r.fn << " tn=" << r.tn << "\n";
    return os.str();
}

}  // namespace

struct vmd_dataset_s {
    std::vector<vmd::Sample> samples;
};

struct vmd_model_s {
    std::unique_ptr<vmd::Trainer> trainer;
};

extern "C" {

const char* vmd_version(void) { return kVersion; }

const char* vmd_last_error(void) { return g_last_error.c_str(); }

void vmd_string_free(char* s) { std::free(s); }

vmd_status vmd_synth_run(const char* overrides, const char* out_path, char** summary_json) {
    return guarded([&]() {
        require_arg(out_path, "out_path");
        vmd::ConfigMap cm;
        if (overrides && *overrides) cm.apply_overrides(overrides);
        vmd::GeneratorSpec spec = generator_spec_from(cm);
        std::vector<vmd::Sample> data = vmd::generate(spec);
        vmd::save_dataset(data, out_path, &spec);
        size_t vulnerable = 0;
        for (const auto& s : data) vulnerable += static_cast<size_t>(s.label);
        ordered_json summary;
        summary["path"] = out_path;
        summary["meta"] = std::string(out_path) + ".meta.json";
        summary["n"] = data.size();
        summary["vulnerable"] = vulnerable;
        summary["stable"] = data.size() - vulnerable;
        summary["fingerprint"] = fingerprint_hex(vmd::dataset_fingerprint(data));
        set_out(summary_json, summary);
    });
}

vmd_status vmd_train_run(const char* config_path, const char* overrides, const char* data_path,
                         const char* out_dir, char** summary_json) {
    return guarded([&]() {
        require_arg(data_path, "data_path");
        require_arg(out_dir, "out_dir");
        vmd::TrainConfig cfg = load_train_config(config_path, overrides);
        std::vector<vmd::Sample> data = vmd::load_dataset(data_path);
        if (data.empty()) throw vmd::UsageError("dataset is empty: " + std::string(data_path));
        vmd::SplitPlan plan = vmd::split(data, cfg.split);
        if (cfg.fold >= plan.n_folds()) {
            throw vmd::UsageError("fold " + std::to_string(cfg.fold) + " out of range for " +
                                  std::to_string(plan.n_folds()) + " folds");
        }

        fs::create_directories(out_dir);
        fs::path dir(out_dir);
        std::ofstream log_stream(dir / "trainlog.jsonl", std::ios::trunc);
        if (!log_stream) throw vmd::IoError("cannot write trainlog under " + std::string(out_dir));

        vmd::Trainer trainer(cfg, data[0].x_s.size(), data[0].x_e.size());
        trainer.on_epoch = [&log_stream](const vmd::EpochLog& e) {
            log_stream << vmd::epoch_log_to_json(e).dump() << "\n";
            log_stream.flush();
        };
        trainer.run(data, plan);

        std::string ckpt_path = (dir / "final.ckpt").string();
        trainer.save_checkpoint(ckpt_path);

        ordered_json manifest;
        manifest["config"] = vmd::train_config_to_json(cfg);
        manifest["dataset"] = {{"path", data_path},
                               {"fingerprint", fingerprint_hex(vmd::dataset_fingerprint(data))}};
        manifest["outputs"] = {"trainlog.jsonl", "final.ckpt"};
        write_manifest(dir, "train", manifest);

        ordered_json summary;
        summary["out_dir"] = out_dir;
        summary["checkpoint"] = ckpt_path;
        summary["epochs"] = trainer.completed_epochs();
        summary["steps"] = trainer.adam_steps();
        if (!trainer.log().empty()) {
            const auto& last = trainer.log().back();
            summary["final_loss"] = last.loss.total;
            summary["final_val"] =
                last.val ? vmd::metrics_to_json(*last.val) : ordered_json(nullptr);
        }
        set_out(summary_json, summary);
    });
}

vmd_status vmd_eval_run(const char* checkpoint_path, const char* data_path, const char* split,
                        const char* branch, const char* out_dir, char** report_json) {
    return guarded([&]() {
        require_arg(checkpoint_path, "checkpoint_path");
        require_arg(data_path, "data_path");
        std::string split_name = (split && *split) ? split : "test";
        std::string branch_str = (branch && *branch) ? branch : "student";

        auto trainer = vmd::Trainer::restore_checkpoint(checkpoint_path);
        std::vector<vmd::Sample> data = vmd::load_dataset(data_path);
        if (data.empty()) throw vmd::UsageError("dataset is empty: " + std::string(data_path));
        EvalSelection sel = select_eval(trainer->config(), data, split_name, branch_str);

        std::vector<double> scores =
            vmd::branch_scores(trainer->model(), data, sel.indices, sel.branch);
        vmd::MetricReport report =
            vmd::compute_metrics(scores, vmd::labels_at(data, sel.indices));

        ordered_json j;
        j["checkpoint"] = checkpoint_path;
        j["dataset"] = data_path;
        j["split"] = split_name;
        j["branch"] = branch_str;
        j["metrics"] = vmd::metrics_to_json(report);
        if (out_dir && *out_dir) {
            fs::create_directories(out_dir);
            fs::path dir(out_dir);
            write_text_file(dir / "metrics.json", j.dump(2) + "\n");
            write_text_file(dir / "metrics.txt", metrics_text(report));
            ordered_json manifest;
            manifest["checkpoint"] = checkpoint_path;
            manifest["dataset"] = {{"path", data_path},
                                   {"fingerprint",
                                    fingerprint_hex(vmd::dataset_fingerprint(data))}};
            manifest["split"] = split_name;
            manifest["branch"] = branch_str;
            manifest["outputs"] = {"metrics.json", "metrics.txt"};
            write_manifest(dir, "eval", manifest);
        }
        set_out(report_json, j);
    });
}

vmd_status vmd_ablate_run(const char* config_path, const char* overrides, const char* data_path,
                          const char* seeds_csv, int assert_trends, int jobs,
                          const char* out_dir, char** table_json) {
    return guarded([&]() {
        require_arg(data_path, "data_path");
        require_arg(out_dir, "out_dir");
        vmd::TrainConfig cfg = load_train_config(config_path, overrides);

        std::vector<uint64_t> seeds;
        {
            std::string csv = seeds_csv ? seeds_csv : "";
            std::istringstream is(csv);
            std::string tok;
            while (std::getline(is, tok, ',')) {
                if (tok.empty()) continue;
                seeds.push_back(std::stoull(tok));
            }
        }
        if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
        if (assert_trends && seeds.size() < 2) {
            throw vmd::UsageError("--assert-trends needs at least 2 seeds for mean±std");
        }

        std::vector<vmd::Sample> data = vmd::load_dataset(data_path);
        size_t workers = jobs > 0 ? static_cast<size_t>(jobs) : 1;
        vmd::AblationTable table = vmd::run_ablation(data, cfg, seeds, workers);
        vmd::TrendCheck trends = table.check_trends();

        ordered_json j = table.to_json();
        j["trends"] = {{"checked", assert_trends != 0}, {"pass", trends.pass},
                       {"lines", trends.lines}};
        j["table_text"] = table.to_text();

        fs::create_directories(out_dir);
        fs::path dir(out_dir);
        write_text_file(dir / "ablation.json", j.dump(2) + "\n");
        write_text_file(dir / "ablation.txt", table.to_text());
        ordered_json manifest;
        manifest["config"] = vmd::train_config_to_json(cfg);
        manifest["dataset"] = {{"path", data_path},
                               {"fingerprint", fingerprint_hex(vmd::dataset_fingerprint(data))}};
        manifest["seeds"] = seeds;
        manifest["outputs"] = {"ablation.json", "ablation.txt"};
        write_manifest(dir, "ablate", manifest);

        set_out(table_json, j);
        if (assert_trends && !trends.pass) {
            std::string detail;
            for (const auto& line : trends.lines) detail += "\n  " + line;
            throw vmd::AssertionError("ablation trends not satisfied:" + detail);
        }
    });
}

vmd_status vmd_gradcheck_run(const char* op_name, char** report_json) {
    return guarded([&]() {
        vmd::GradcheckReport report = vmd::run_gradcheck(op_name ? op_name : "");
        ordered_json j = report.to_json();
        j["text"] = report.to_text();
        set_out(report_json, j);
        if (!report.pass()) {
            throw vmd::NumericError("gradient check failed; see report");
        }
    });
}

vmd_status vmd_dataset_open(const char* path, vmd_dataset** out) {
    return guarded([&]() {
        require_arg(path, "path");
        if (!out) throw vmd::UsageError("vmd_dataset_open: out handle is null");
        auto d = std::make_unique<vmd_dataset_s>();
        d->samples = vmd::load_dataset(path);
        *out = d.release();
    });
}

void vmd_dataset_close(vmd_dataset* d) { delete d; }

size_t vmd_dataset_count(const vmd_dataset* d) { return d ? d->samples.size() : 0; }

size_t vmd_dataset_feature_dim(const vmd_dataset* d) {
    return (d && !d->samples.empty()) ? d->samples[0].x_s.size() : 0;
}

size_t vmd_dataset_report_dim(const vmd_dataset* d) {
    return (d && !d->samples.empty()) ? d->samples[0].x_e.size() : 0;
}

int vmd_dataset_label(const vmd_dataset* d, size_t index) {
    if (!d || index >= d->samples.size()) {
        g_last_error = "vmd_dataset_label: index out of range";
        return -1;
    }
    return d->samples[index].label;
}

vmd_status vmd_dataset_features(const vmd_dataset* d, size_t index, double* out, size_t len) {
    return guarded([&]() {
        if (!d) throw vmd::UsageError("vmd_dataset_features: null dataset");
        if (index >= d->samples.size()) {
            throw vmd::UsageError("vmd_dataset_features: index out of range");
        }
        const auto& x = d->samples[index].x_s;
        if (!out || len != x.size()) {
            throw vmd::UsageError("vmd_dataset_features: buffer length must equal feature_dim");
        }
        std::memcpy(out, x.data(), x.size() * sizeof(double));
    });
}

vmd_status vmd_model_open(const char* checkpoint_path, vmd_model** out) {
    return guarded([&]() {
        require_arg(checkpoint_path, "checkpoint_path");
        if (!out) throw vmd::UsageError("vmd_model_open: out handle is null");
        auto m = std::make_unique<vmd_model_s>();
        m->trainer = vmd::Trainer::restore_checkpoint(checkpoint_path);
        *out = m.release();
    });
}

void vmd_model_close(vmd_model* m) { delete m; }

size_t vmd_model_feature_dim(const vmd_model* m) {
    return m ? m->trainer->model().config().feature_dim : 0;
}

size_t vmd_model_latent_dim(const vmd_model* m) {
    return m ? m->trainer->model().config().latent_dim : 0;
}

vmd_status vmd_model_infer(vmd_model* m, const double* features, size_t len,
                           double out_probs[2]) {
    return guarded([&]() {
        if (!m) throw vmd::UsageError("vmd_model_infer: null model");
        if (!features || !out_probs) throw vmd::UsageError("vmd_model_infer: null buffer");
        std::vector<double> x(features, features + len);
        vmd::InferResult r = vmd::infer_student(m->trainer->model(), x);
        out_probs[0] = r.probabilities[0];
        out_probs[1] = r.probabilities[1];
    });
}

}  // extern "C"
