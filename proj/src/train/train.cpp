#include "train/train.hpp"

#include <chrono>
#include <cmath>

#include "eval/infer.hpp"

namespace vmd {

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be >= 1");
    if (batch_size < 2) {
        throw InvalidArgument("TrainConfig: batch_size must be >= 2 so contrastive "
                              "terms can see a potential negative");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("TrainConfig: lr must be > 0");
    if (weight_decay < 0.0) throw InvalidArgument("TrainConfig: weight_decay must be >= 0");
    if (eval_every < 1) throw InvalidArgument("TrainConfig: eval_every must be >= 1");
    if (latent_dim < 2) throw InvalidArgument("TrainConfig: latent_dim must be >= 2");
    if (hidden_dims.empty()) throw InvalidArgument("TrainConfig: hidden_dims must be nonempty");
    weights.validate();
}

void TrainConfig::apply_paper_scale() {
    paper_scale = true;
    epochs = 400;
    latent_dim = 512;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["seed"] = cfg.seed;
    j["eval_every"] = cfg.eval_every;
    j["hidden_dims"] = cfg.hidden_dims;
    j["latent_dim"] = cfg.latent_dim;
    j["fold"] = cfg.fold;
    j["paper_scale"] = cfg.paper_scale;
    j["similarity_input"] =
        cfg.options.similarity_input == SimilarityInput::Logits ? "logits" : "probs";
    j["elbo_expectation"] =
        cfg.options.elbo_expectation == ElboExpectation::ExpertZ ? "expert_z" : "student_z";
    j["weights"] = {{"alpha1", cfg.weights.alpha[0]}, {"alpha2", cfg.weights.alpha[1]},
                    {"alpha3", cfg.weights.alpha[2]}, {"alpha4", cfg.weights.alpha[3]},
                    {"lambda1", cfg.weights.lambda[0]}, {"lambda2", cfg.weights.lambda[1]},
                    {"lambda3", cfg.weights.lambda[2]}, {"tau", cfg.weights.tau}};
    j["split"] = {{"test_fraction", cfg.split.test_fraction},
                  {"k_folds", cfg.split.k_folds},
                  {"seed", cfg.split.seed}};
    return j;
}

TrainConfig train_config_from_json(const nlohmann::ordered_json& j) {
    TrainConfig cfg;
    cfg.epochs = j.at("epochs").get<size_t>();
    cfg.batch_size = j.at("batch_size").get<size_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.eval_every = j.at("eval_every").get<size_t>();
    cfg.hidden_dims = j.at("hidden_dims").get<std::vector<size_t>>();
    cfg.latent_dim = j.at("latent_dim").get<size_t>();
    cfg.fold = j.at("fold").get<size_t>();
    cfg.paper_scale = j.at("paper_scale").get<bool>();
    cfg.options.similarity_input = j.at("similarity_input").get<std::string>() == "probs"
                                       ? SimilarityInput::Probs
                                       : SimilarityInput::Logits;
    cfg.options.elbo_expectation = j.at("elbo_expectation").get<std::string>() == "student_z"
                                       ? ElboExpectation::StudentZ
                                       : ElboExpectation::ExpertZ;
    const auto& w = j.at("weights");
    cfg.weights.alpha = {w.at("alpha1").get<double>(), w.at("alpha2").get<double>(),
                         w.at("alpha3").get<double>(), w.at("alpha4").get<double>()};
    cfg.weights.lambda = {w.at("lambda1").get<double>(), w.at("lambda2").get<double>(),
                          w.at("lambda3").get<double>()};
    cfg.weights.tau = w.at("tau").get<double>();
    const auto& s = j.at("split");
    cfg.split.test_fraction = s.at("test_fraction").get<double>();
    cfg.split.k_folds = s.at("k_folds").get<size_t>();
    cfg.split.seed = s.at("seed").get<uint64_t>();
    return cfg;
}

TrainConfig train_config_from(ConfigMap& cm) {
    TrainConfig cfg;
    cfg.epochs = cm.get_u64("epochs", cfg.epochs);
    cfg.batch_size = cm.get_u64("batch_size", cfg.batch_size);
    cfg.lr = cm.get_double("lr", cfg.lr);
    cfg.weight_decay = cm.get_double("weight_decay", cfg.weight_decay);
    cfg.seed = cm.get_u64("seed", cfg.seed);
    cfg.eval_every = cm.get_u64("eval_every", cfg.eval_every);
    cfg.hidden_dims = cm.get_size_list("hidden_dims", cfg.hidden_dims);
    cfg.latent_dim = cm.get_u64("latent_dim", cfg.latent_dim);
    cfg.fold = cm.get_u64("fold", cfg.fold);
    cfg.paper_scale = cm.get_bool("paper_scale", cfg.paper_scale);

    std::string sim = cm.get_string("similarity_input", "logits");
    if (sim == "logits") {
        cfg.options.similarity_input = SimilarityInput::Logits;
    } else if (sim == "probs") {
        cfg.options.similarity_input = SimilarityInput::Probs;
    } else {
        throw UsageError("similarity_input must be 'logits' or 'probs'");
    }
    std::string elbo = cm.get_string("elbo_expectation", "expert_z");
    if (elbo == "expert_z") {
        cfg.options.elbo_expectation = ElboExpectation::ExpertZ;
    } else if (elbo == "student_z") {
        cfg.options.elbo_expectation = ElboExpectation::StudentZ;
    } else {
        throw UsageError("elbo_expectation must be 'expert_z' or 'student_z'");
    }

    cfg.weights.alpha[0] = cm.get_double("weights.alpha1", cfg.weights.alpha[0]);
    cfg.weights.alpha[1] = cm.get_double("weights.alpha2", cfg.weights.alpha[1]);
    cfg.weights.alpha[2] = cm.get_double("weights.alpha3", cfg.weights.alpha[2]);
    cfg.weights.alpha[3] = cm.get_double("weights.alpha4", cfg.weights.alpha[3]);
    cfg.weights.lambda[0] = cm.get_double("weights.lambda1", cfg.weights.lambda[0]);
    cfg.weights.lambda[1] = cm.get_double("weights.lambda2", cfg.weights.lambda[1]);
    cfg.weights.lambda[2] = cm.get_double("weights.lambda3", cfg.weights.lambda[2]);
    cfg.weights.tau = cm.get_double("weights.tau", cfg.weights.tau);

    cfg.split.test_fraction = cm.get_double("split.test_fraction", cfg.split.test_fraction);
    cfg.split.k_folds = cm.get_u64("split.k_folds", cfg.split.k_folds);
    cfg.split.seed = cm.get_u64("split.seed", cfg.split.seed);

    if (cfg.paper_scale) cfg.apply_paper_scale();
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json epoch_log_to_json(const EpochLog& e) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss"] = {{"total", e.loss.total},   {"i_st", e.loss.i_st},
                 {"i_se", e.loss.i_se},     {"i_te", e.loss.i_te},
                 {"h_cls", e.loss.h_cls},   {"kld_se", e.loss.kld_se},
                 {"kld_te", e.loss.kld_te}};
    j["val"] = e.val ? metrics_to_json(*e.val) : nlohmann::ordered_json(nullptr);
    j["wall_s"] = e.wall_s;
    return j;
}

void forward_batch(ForwardBatch& fb, VmdModel& model, const std::vector<Sample>& data,
                   const std::vector<size_t>& indices, const LossWeights& weights,
                   const LossOptions& options, EpsStreams& eps) {
    const auto& a = weights.alpha;
    const auto& l = weights.lambda;
    bool need_teacher = a[0] != 0.0 || a[2] != 0.0 || (a[3] != 0.0 && l[0] != 0.0);
    bool need_expert = a[1] != 0.0 || a[2] != 0.0 || (a[3] != 0.0 && l[2] != 0.0);

    Graph& g = fb.graph;
    BatchOutputs& out = fb.outputs;
    size_t latent = model.config().latent_dim;
    for (size_t idx : indices) {
        const Sample& s = data.at(idx);
        out.labels.push_back(s.label);

        Tensor x_s = g.leaf({s.x_s.size()}, s.x_s);
        GaussianLatent zs = model.encode(Branch::Student, fb.bp, x_s, eps.student.normal_vector(latent));
        out.student_pred.push_back(model.classify(Branch::Student, fb.bp, zs, LatentMode::Sample));
        out.student_z.push_back(zs);

        if (need_teacher) {
            Tensor mask = g.leaf({s.mask.size()}, s.mask);
            Tensor x_t = VmdModel::teacher_input(x_s, mask);
            GaussianLatent zt =
                model.encode(Branch::Teacher, fb.bp, x_t, eps.teacher.normal_vector(latent));
            out.teacher_pred.push_back(
                model.classify(Branch::Teacher, fb.bp, zt, LatentMode::Sample));
            out.teacher_z.push_back(zt);
        }
        if (need_expert) {
            Tensor x_e = g.leaf({s.x_e.size()}, s.x_e);
            GaussianLatent ze =
                model.encode(Branch::Expert, fb.bp, x_e, eps.expert.normal_vector(latent));
            out.expert_pred.push_back(model.classify(Branch::Expert, fb.bp, ze, LatentMode::Sample));
            out.expert_z.push_back(ze);
        }
    }

    if (a[1] != 0.0) {
        for (size_t i = 0; i < indices.size(); ++i) {
            out.student_pred_from_expert_z.push_back(
                options.elbo_expectation == ElboExpectation::ExpertZ
                    ? model.classify_latent(Branch::Student, fb.bp, out.expert_z[i].sample)
                    : out.student_pred[i]);
        }
    }
    if (a[2] != 0.0) {
        for (size_t i = 0; i < indices.size(); ++i) {
            out.teacher_pred_from_expert_z.push_back(
                options.elbo_expectation == ElboExpectation::ExpertZ
                    ? model.classify_latent(Branch::Teacher, fb.bp, out.expert_z[i].sample)
                    : out.teacher_pred[i]);
        }
    }
}

namespace {

void check_finite_report(const LossReport& r, size_t epoch, size_t batch) {
    const std::pair<const char*, double> terms[] = {
        {"I(S,T)", r.i_st},   {"I(S,E)", r.i_se},   {"I(T,E)", r.i_te}, {"H_cls", r.h_cls},
        {"KLD_SE", r.kld_se}, {"KLD_TE", r.kld_te}, {"total", r.total}};
    for (const auto& [name, v] : terms) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite loss: term " + std::string(name) + " at epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(batch));
        }
    }
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, size_t feature_dim, size_t report_dim)
    : cfg_(std::move(cfg)),
      feature_dim_(feature_dim),
      report_dim_(report_dim),
      shuffle_rng_(cfg_.seed, "data.shuffle"),
      eps_{RngStream(cfg_.seed, "eps.student"), RngStream(cfg_.seed, "eps.teacher"),
           RngStream(cfg_.seed, "eps.expert")} {
    cfg_.validate();
    VmdModelConfig mc;
    mc.feature_dim = feature_dim;
    mc.report_dim = report_dim;
    mc.hidden_dims = cfg_.hidden_dims;
    mc.latent_dim = cfg_.latent_dim;
    model_ = std::make_unique<VmdModel>(mc, cfg_.seed);
    adam_ = std::make_unique<Adam>(model_->parameters());
}

void Trainer::run(const std::vector<Sample>& data, const SplitPlan& plan) {
    if (completed_epochs_ >= cfg_.epochs) return;
    run_epochs(data, plan, cfg_.epochs - completed_epochs_);
}

void Trainer::run_epochs(const std::vector<Sample>& data, const SplitPlan& plan, size_t count) {
    if (data.empty()) throw InvalidArgument("run_training: empty dataset");
    for (const Sample& s : data) {
        if (s.x_s.size() != feature_dim_ || s.x_e.size() != report_dim_) {
            throw DimensionError("run_training: dataset feature widths do not match the model");
        }
    }
    for (size_t i = 0; i < count; ++i) {
        train_epoch(data, plan, completed_epochs_ + 1);
        ++completed_epochs_;
    }
}

void Trainer::train_epoch(const std::vector<Sample>& data, const SplitPlan& plan,
                          size_t epoch_no) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<size_t> order = plan.train_indices(cfg_.fold);
    if (order.empty()) throw InvalidArgument("run_training: empty training split");
    shuffle_rng_.shuffle(order);

    LossReport epoch_mean;
    size_t n_batches = 0;
    for (size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
        size_t end = std::min(order.size(), begin + cfg_.batch_size);
        std::vector<size_t> batch(order.begin() + static_cast<long>(begin),
                                  order.begin() + static_cast<long>(end));

        ForwardBatch fb;
        forward_batch(fb, *model_, data, batch, cfg_.weights, cfg_.options, eps_);
        ObjectiveResult obj = global_objective(fb.graph, fb.outputs, cfg_.weights, cfg_.options);
        check_finite_report(obj.report, epoch_no, n_batches);

        fb.graph.backward(obj.total);
        fb.bp.harvest();
        adam_->step(cfg_.lr, cfg_.weight_decay);
        model_->zero_grad();
        if (after_step) after_step(*this);

        epoch_mean.total += obj.report.total;
        epoch_mean.i_st += obj.report.i_st;
        epoch_mean.i_se += obj.report.i_se;
        epoch_mean.i_te += obj.report.i_te;
        epoch_mean.h_cls += obj.report.h_cls;
        epoch_mean.kld_se += obj.report.kld_se;
        epoch_mean.kld_te += obj.report.kld_te;
        ++n_batches;
    }
    double inv = 1.0 / static_cast<double>(n_batches);
    epoch_mean.total *= inv;
    epoch_mean.i_st *= inv;
    epoch_mean.i_se *= inv;
    epoch_mean.i_te *= inv;
    epoch_mean.h_cls *= inv;
    epoch_mean.kld_se *= inv;
    epoch_mean.kld_te *= inv;

    EpochLog entry;
    entry.epoch = epoch_no;
    entry.loss = epoch_mean;
    const auto& val_idx = plan.val_indices(cfg_.fold);
    if (!val_idx.empty() && (epoch_no % cfg_.eval_every == 0 || epoch_no == cfg_.epochs)) {
        std::vector<double> scores = branch_scores(*model_, data, val_idx, Branch::Student);
        entry.val = compute_metrics(scores, labels_at(data, val_idx));
    }
    entry.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_.push_back(entry);
    if (on_epoch) on_epoch(entry);
}

void Trainer::save_checkpoint(const std::string& path) const {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "vmd_train_state";
    ckpt.meta["epoch"] = completed_epochs_;
    ckpt.meta["feature_dim"] = feature_dim_;
    ckpt.meta["report_dim"] = report_dim_;
    ckpt.meta["train_config"] = train_config_to_json(cfg_);
    ckpt.meta["rng"] = {{"data.shuffle", shuffle_rng_.serialize()},
                        {"eps.student", eps_.student.serialize()},
                        {"eps.teacher", eps_.teacher.serialize()},
                        {"eps.expert", eps_.expert.serialize()}};
    for (const Param* p : model_->parameters()) {
        ckpt.add(p->name, p->shape, p->value);
    }
    adam_->save(ckpt);
    ckpt.save(path);
}

std::unique_ptr<Trainer> Trainer::restore_checkpoint(const std::string& path) {
    Checkpoint ckpt = Checkpoint::load(path);
    if (ckpt.meta.value("kind", "") != "vmd_train_state") {
        throw ParseError("not a training checkpoint: " + path);
    }
    TrainConfig cfg = train_config_from_json(ckpt.meta.at("train_config"));
    auto trainer = std::make_unique<Trainer>(cfg, ckpt.meta.at("feature_dim").get<size_t>(),
                                             ckpt.meta.at("report_dim").get<size_t>());
    for (Param* p : trainer->model_->parameters()) {
        const auto& e = ckpt.require(p->name);
        if (e.shape != p->shape) {
            throw IoError("checkpoint tensor '" + p->name + "' has shape " + shape_str(e.shape) +
                          ", model expects " + shape_str(p->shape));
        }
        p->value = e.data;
    }
    trainer->adam_->load(ckpt);
    const auto& rng = ckpt.meta.at("rng");
    trainer->shuffle_rng_.restore(rng.at("data.shuffle").get<std::string>());
    trainer->eps_.student.restore(rng.at("eps.student").get<std::string>());
    trainer->eps_.teacher.restore(rng.at("eps.teacher").get<std::string>());
    trainer->eps_.expert.restore(rng.at("eps.expert").get<std::string>());
    trainer->completed_epochs_ = ckpt.meta.at("epoch").get<size_t>();
    return trainer;
}

}  // namespace vmd
