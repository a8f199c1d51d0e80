#include "synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/rng.hpp"

namespace vmd {

void GeneratorSpec::validate() const {
    if (n_samples == 0) throw InvalidArgument("GeneratorSpec: n_samples must be positive");
    if (feature_dim == 0 || report_dim == 0) {
        throw InvalidArgument("GeneratorSpec: feature_dim and report_dim must be positive");
    }
    if (signal_dims == 0) throw InvalidArgument("GeneratorSpec: signal_dims must be positive");
    if (signal_dims + mask_noise_dims > feature_dim) {
        throw InvalidArgument("GeneratorSpec: signal_dims + mask_noise_dims (" +
                              std::to_string(signal_dims + mask_noise_dims) +
                              ") exceeds feature_dim (" + std::to_string(feature_dim) + ")");
    }
    if (!(class_balance > 0.0 && class_balance < 1.0)) {
        throw InvalidArgument("GeneratorSpec: class_balance must lie strictly in (0, 1)");
    }
    if (noise_scale < 0.0 || !std::isfinite(noise_scale)) {
        throw InvalidArgument("GeneratorSpec: noise_scale must be finite and >= 0");
    }
}

std::vector<Sample> generate(const GeneratorSpec& spec) {
    spec.validate();
    RngStream rng(spec.seed, "synth");

    // Fixed linear map from the class factor into report space.
    std::vector<double> expert_map(spec.report_dim * spec.signal_dims);
    double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.signal_dims));
    for (auto& v : expert_map) v = map_scale * rng.normal();

    size_t distract_begin = spec.signal_dims;
    size_t distract_end = spec.signal_dims + spec.mask_noise_dims;
    double distractor_scale = 1.0 + spec.noise_scale;

    std::vector<Sample> out;
    out.reserve(spec.n_samples);
    for (size_t i = 0; i < spec.n_samples; ++i) {
        Sample s;
        {
            std::ostringstream id;
            id << "s" << std::setw(6) << std::setfill('0') << i;
            s.id = id.str();
        }
        s.label = rng.uniform() < spec.class_balance ? 1 : 0;
        double sign = s.label == 1 ? 1.0 : -1.0;

        // Class factor: mean +-1 per signal dim, spread tied to noise_scale so
        // the noiseless limit is fully deterministic given the label.
        std::vector<double> u(spec.signal_dims);
        for (auto& v : u) v = sign + spec.noise_scale * rng.normal();

        s.x_s.resize(spec.feature_dim);
        s.mask.assign(spec.feature_dim, 1.0);
        for (size_t d = 0; d < spec.feature_dim; ++d) {
            if (d < distract_begin) {
                s.x_s[d] = u[d] + spec.noise_scale * rng.normal();
            } else if (d < distract_end) {
                s.x_s[d] = distractor_scale * rng.normal();
                s.mask[d] = 0.0;
            } else {
                s.x_s[d] = 0.5 * spec.noise_scale * rng.normal();
            }
        }
        s.x_t.resize(spec.feature_dim);
        for (size_t d = 0; d < spec.feature_dim; ++d) s.x_t[d] = s.x_s[d] * s.mask[d];

        s.x_e.resize(spec.report_dim);
        for (size_t r = 0; r < spec.report_dim; ++r) {
            double acc = 0.0;
            for (size_t d = 0; d < spec.signal_dims; ++d) {
                acc += expert_map[r * spec.signal_dims + d] * u[d];
            }
            s.x_e[r] = acc + 0.25 * spec.noise_scale * rng.normal();
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<size_t> SplitPlan::train_indices(size_t fold) const {
    if (fold >= folds.size()) throw InvalidArgument("SplitPlan: fold index out of range");
    if (folds.size() == 1) return folds[0];
    std::vector<size_t> out;
    for (size_t f = 0; f < folds.size(); ++f) {
        if (f == fold) continue;
        out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    return out;
}

const std::vector<size_t>& SplitPlan::val_indices(size_t fold) const {
    static const std::vector<size_t> kEmpty;
    if (fold >= folds.size()) throw InvalidArgument("SplitPlan: fold index out of range");
    return folds.size() == 1 ? kEmpty : folds[fold];
}

SplitPlan split(const std::vector<Sample>& dataset, const SplitSpec& spec) {
    if (dataset.empty()) throw InvalidArgument("split: empty dataset");
    if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0)) {
        throw InvalidArgument("split: test_fraction must lie in [0, 1)");
    }
    if (spec.k_folds == 0) throw InvalidArgument("split: k_folds must be >= 1");

    RngStream rng(spec.seed, "split");
    std::vector<std::vector<size_t>> by_class(2);
    for (size_t i = 0; i < dataset.size(); ++i) {
        int l = dataset[i].label;
        if (l != 0 && l != 1) throw InvalidArgument("split: labels must be 0 or 1");
        by_class[static_cast<size_t>(l)].push_back(i);
    }

    SplitPlan plan;
    plan.folds.resize(spec.k_folds);
    size_t n_remaining = 0;
    for (auto& idx : by_class) {
        rng.shuffle(idx);
        size_t n_test = 0;
        if (spec.test_fraction > 0.0 && idx.size() >= 2) {
            n_test = std::max<size_t>(
                1, static_cast<size_t>(std::llround(spec.test_fraction *
                                                    static_cast<double>(idx.size()))));
            n_test = std::min(n_test, idx.size() - 1);
        }
        plan.test.insert(plan.test.end(), idx.begin(), idx.begin() + static_cast<long>(n_test));
        for (size_t k = n_test; k < idx.size(); ++k) {
            plan.folds[(k - n_test) % spec.k_folds].push_back(idx[k]);
        }
        n_remaining += idx.size() - n_test;
    }
    if (spec.k_folds > n_remaining) {
        throw InvalidArgument("split: k_folds (" + std::to_string(spec.k_folds) +
                              ") exceeds available samples (" + std::to_string(n_remaining) + ")");
    }
    std::sort(plan.test.begin(), plan.test.end());
    for (auto& f : plan.folds) std::sort(f.begin(), f.end());
    return plan;
}

namespace {

nlohmann::ordered_json spec_to_json(const GeneratorSpec& s) {
    return {{"n_samples", s.n_samples},
            {"feature_dim", s.feature_dim},
            {"report_dim", s.report_dim},
            {"signal_dims", s.signal_dims},
            {"mask_noise_dims", s.mask_noise_dims},
            {"class_balance", s.class_balance},
            {"noise_scale", s.noise_scale},
            {"seed", s.seed}};
}

std::vector<double> finite_array(const nlohmann::ordered_json& j, const char* field,
                                 size_t line_no) {
    if (!j.contains(field) || !j[field].is_array()) {
        throw ParseError("line " + std::to_string(line_no) + ": missing array field '" + field +
                         "'");
    }
    std::vector<double> out;
    out.reserve(j[field].size());
    for (const auto& v : j[field]) {
        if (!v.is_number()) {
            throw ParseError("line " + std::to_string(line_no) + ": non-numeric entry in '" +
                             field + "'");
        }
        double x = v.get<double>();
        if (!std::isfinite(x)) {
            throw ParseError("line " + std::to_string(line_no) + ": non-finite entry in '" +
                             field + "'");
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace

void save_dataset(const std::vector<Sample>& dataset, const std::string& path,
                  const GeneratorSpec* spec) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open dataset for writing: " + path);
    for (const Sample& s : dataset) {
        nlohmann::ordered_json j = {{"id", s.id},   {"x_s", s.x_s}, {"mask", s.mask},
                                    {"x_t", s.x_t}, {"x_e", s.x_e}, {"label", s.label}};
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("short write while saving dataset: " + path);
    if (spec) {
        std::ofstream meta(path + ".meta.json", std::ios::trunc);
        if (!meta) throw IoError("cannot write dataset sidecar for: " + path);
        meta << spec_to_json(*spec).dump(2) << "\n";
    }
}

std::vector<Sample> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::vector<Sample> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        Sample s;
        if (!j.contains("id") || !j["id"].is_string()) {
            throw ParseError("line " + std::to_string(line_no) + ": missing string field 'id'");
        }
        s.id = j["id"].get<std::string>();
        s.x_s = finite_array(j, "x_s", line_no);
        s.mask = finite_array(j, "mask", line_no);
        s.x_t = finite_array(j, "x_t", line_no);
        s.x_e = finite_array(j, "x_e", line_no);
        if (!j.contains("label") || !j["label"].is_number_integer()) {
            throw ParseError("line " + std::to_string(line_no) + ": missing integer 'label'");
        }
        s.label = j["label"].get<int>();
        if (s.label != 0 && s.label != 1) {
            throw ParseError("line " + std::to_string(line_no) + ": label must be 0 or 1");
        }
        if (s.mask.size() != s.x_s.size() || s.x_t.size() != s.x_s.size()) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": x_s, mask and x_t lengths disagree");
        }
        for (size_t d = 0; d < s.x_s.size(); ++d) {
            if (s.mask[d] != 0.0 && s.mask[d] != 1.0) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": mask entries must be 0 or 1");
            }
            if (s.x_t[d] != s.x_s[d] * s.mask[d]) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": x_t does not equal x_s * mask");
            }
        }
        if (!out.empty()) {
            if (s.x_s.size() != out[0].x_s.size() || s.x_e.size() != out[0].x_e.size()) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": feature widths differ from earlier samples");
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

uint64_t dataset_fingerprint(const std::vector<Sample>& dataset) {
    uint64_t h = 1469598103934665603ull;
    auto mix_bytes = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const Sample& s : dataset) {
        mix_bytes(s.id.data(), s.id.size());
        for (const auto* vec : {&s.x_s, &s.mask, &s.x_t, &s.x_e}) {
            mix_bytes(vec->data(), vec->size() * sizeof(double));
        }
        mix_bytes(&s.label, sizeof(s.label));
    }
    return h;
}

}  // namespace vmd
