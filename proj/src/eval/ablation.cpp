#include "eval/ablation.hpp"

#include <atomic>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "eval/infer.hpp"

namespace vmd {

std::vector<AblationVariant> ablation_variants(const LossWeights& base) {
    auto masked = [&base](std::array<double, 4> am, std::array<double, 3> lm) {
        LossWeights w = base;
        for (size_t i = 0; i < 4; ++i) w.alpha[i] = base.alpha[i] * am[i];
        for (size_t i = 0; i < 3; ++i) w.lambda[i] = base.lambda[i] * lm[i];
        return w;
    };
    return {
        {"baseline", masked({0, 0, 0, 1}, {0, 1, 0})},
        {"w/o teacher", masked({0, 1, 0, 1}, {0, 1, 1})},
        {"w/o expert", masked({1, 0, 0, 1}, {1, 1, 0})},
        {"VMD", masked({1, 1, 1, 1}, {1, 1, 1})},
    };
}

MeanStd AblationRow::roc() const {
    std::vector<double> vals;
    vals.reserve(per_seed.size());
    for (const auto& r : per_seed) {
        if (r.roc_auc) vals.push_back(*r.roc_auc);
    }
    return mean_std(vals);
}

const AblationRow& AblationTable::row(const std::string& setting) const {
    for (const auto& r : rows) {
        if (r.setting == setting) return r;
    }
    throw InvalidArgument("ablation table has no row '" + setting + "'");
}

TrendCheck AblationTable::check_trends(double min_gap) const {
    TrendCheck out;
    auto require = [&](const std::string& what, bool ok) {
        out.pass = out.pass && ok;
        out.lines.push_back(std::string(ok ? "pass" : "FAIL") + ": " + what);
    };
    double base = row("baseline").roc().mean;
    double wot = row("w/o teacher").roc().mean;
    double woe = row("w/o expert").roc().mean;
    double full = row("VMD").roc().mean;
    std::ostringstream gap;
    gap << std::fixed << std::setprecision(4) << (full - base);

    require("VMD > w/o teacher (mean test ROC)", full > wot);
    require("VMD > w/o expert (mean test ROC)", full > woe);
    require("w/o teacher > baseline (mean test ROC)", wot > base);
    require("w/o expert > baseline (mean test ROC)", woe > base);
    require("VMD - baseline >= " + std::to_string(min_gap) + " (gap " + gap.str() + ")",
            full - base >= min_gap);

    double t_full = row("teacher").roc().mean;
    double t_woe = row("teacher w/o expert").roc().mean;
    require("teacher > teacher w/o expert (mean test ROC)", t_full > t_woe);
    return out;
}

nlohmann::ordered_json AblationTable::to_json() const {
    nlohmann::ordered_json j;
    j["seeds"] = seeds;
    auto& rws = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["setting"] = r.setting;
        row["branch"] = r.branch;
        auto agg = [&r](auto field) {
            std::vector<double> vals;
            for (const auto& m : r.per_seed) vals.push_back(field(m));
            MeanStd ms = mean_std(vals);
            return nlohmann::ordered_json{
                {"mean", ms.mean}, {"std", ms.stddev}, {"per_seed", vals}};
        };
        row["roc_auc"] = agg([](const MetricReport& m) { return m.roc_auc.value_or(0.0); });
        row["accuracy"] = agg([](const MetricReport& m) { return m.accuracy; });
        row["precision"] = agg([](const MetricReport& m) { return m.precision; });
        row["recall"] = agg([](const MetricReport& m) { return m.recall; });
        row["fbeta"] = agg([](const MetricReport& m) { return m.fbeta; });
        rws.push_back(std::move(row));
    }
    return j;
}

std::string AblationTable::to_text() const {
    std::ostringstream os;
    auto cell = [](double mean, double sd) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(4) << mean << "±" << sd;
        return c.str();
    };
    os << std::left << std::setw(22) << "setting" << std::setw(9) << "branch";
    for (const char* col : {"ROC", "Accuracy", "Precision", "Recall", "Fbeta"}) {
        os << std::setw(16) << col;
    }
    os << "\n";
    for (const auto& r : rows) {
        std::vector<double> roc, acc, prec, rec, fb;
        for (const auto& m : r.per_seed) {
            roc.push_back(m.roc_auc.value_or(0.0));
            acc.push_back(m.accuracy);
            prec.push_back(m.precision);
            rec.push_back(m.recall);
            fb.push_back(m.fbeta);
        }
        os << std::left << std::setw(22) << r.setting << std::setw(9) << r.branch;
        for (const auto* v : {&roc, &acc, &prec, &rec, &fb}) {
            MeanStd ms = mean_std(*v);
            os << std::setw(16) << cell(ms.mean, ms.stddev);
        }
        os << "\n";
    }
    return os.str();
}

AblationTable run_ablation(const std::vector<Sample>& data, const TrainConfig& base,
                           const std::vector<uint64_t>& seeds, size_t jobs,
                           const std::function<void(const std::string&)>& progress) {
    if (seeds.size() < 2) {
        throw InvalidArgument("run_ablation: at least 2 seeds are required for mean±std");
    }
    if (data.empty()) throw InvalidArgument("run_ablation: empty dataset");

    const std::vector<AblationVariant> variants = ablation_variants(base.weights);
    SplitPlan plan = split(data, base.split);

    struct Task {
        size_t seed_idx;
        size_t variant_idx;
    };
    std::vector<Task> tasks;
    for (size_t si = 0; si < seeds.size(); ++si) {
        for (size_t vi = 0; vi < variants.size(); ++vi) tasks.push_back({si, vi});
    }

    struct TaskResult {
        MetricReport student;
        std::optional<MetricReport> teacher;
    };
    std::vector<TaskResult> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::mutex progress_mu;

    auto run_task = [&](size_t ti) {
        const Task& t = tasks[ti];
        const AblationVariant& variant = variants[t.variant_idx];
        TrainConfig cfg = base;
        cfg.seed = seeds[t.seed_idx];
        cfg.weights = variant.weights;
        cfg.fold = t.seed_idx % plan.n_folds();

        Trainer trainer(cfg, data[0].x_s.size(), data[0].x_e.size());
        trainer.run(data, plan);

        std::vector<int> labels = labels_at(data, plan.test);
        TaskResult res;
        res.student = compute_metrics(
            branch_scores(trainer.model(), data, plan.test, Branch::Student), labels);
        if (variant.name == "w/o expert" || variant.name == "VMD") {
            res.teacher = compute_metrics(
                branch_scores(trainer.model(), data, plan.test, Branch::Teacher), labels);
        }
        results[ti] = std::move(res);
        if (progress) {
            std::lock_guard<std::mutex> lk(progress_mu);
            progress(variant.name + " seed " + std::to_string(seeds[t.seed_idx]) + ": test ROC " +
                     std::to_string(results[ti].student.roc_auc.value_or(0.0)));
        }
    };

    size_t workers = std::max<size_t>(1, std::min(jobs, tasks.size()));
    if (workers == 1) {
        for (size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    size_t ti = next.fetch_add(1);
                    if (ti >= tasks.size()) return;
                    try {
                        run_task(ti);
                    } catch (...) {
                        errors[ti] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    AblationTable table;
    table.seeds = seeds;
    for (size_t vi = 0; vi < variants.size(); ++vi) {
        AblationRow row;
        row.setting = variants[vi].name;
        row.branch = "student";
        for (size_t si = 0; si < seeds.size(); ++si) {
            row.per_seed.push_back(results[si * variants.size() + vi].student);
        }
        table.rows.push_back(std::move(row));
    }
    auto teacher_row = [&](const std::string& variant_name, const std::string& setting) {
        size_t vi = 0;
        while (variants[vi].name != variant_name) ++vi;
        AblationRow row;
        row.setting = setting;
        row.branch = "teacher";
        for (size_t si = 0; si < seeds.size(); ++si) {
            row.per_seed.push_back(*results[si * variants.size() + vi].teacher);
        }
        table.rows.push_back(std::move(row));
    };
    teacher_row("w/o expert", "teacher w/o expert");
    teacher_row("VMD", "teacher");
    return table;
}

}  // namespace vmd
