#include "tstcc/pipeline.hpp"

#include "tstcc/adam.hpp"
#include "tstcc/augment.hpp"
#include "tstcc/errors.hpp"
#include "tstcc/losses.hpp"
#include "tstcc/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace tstcc {

namespace {

// Fixed tags for deriving per-purpose rng substreams from the run seed.
constexpr uint64_t kTagInit = 11;
constexpr uint64_t kTagEpoch = 13;
constexpr uint64_t kTagAnchor = 17;
constexpr uint64_t kTagLinearHead = 23;

using ModelF = Model<float>;

Tensor<float> scalar_tensor(float v) {
    Tensor<float> t(std::vector<int64_t>{});
    t[0] = v;
    return t;
}

void check_finite(const ad::Var<float>& term, const char* name, int64_t step) {
    if (!term->value.all_finite())
        throw NumericError(std::string("non-finite loss term '") + name + "' at step " +
                           std::to_string(step));
}

Checkpoint make_checkpoint(ModelF& model, const RunConfig& cfg, bool has_classifier,
                           const NormStats* norm, Adam<float>* adam = nullptr,
                           const std::vector<std::string>* adam_param_names = nullptr) {
    Checkpoint ck;
    ck.config_snapshot = cfg.snapshot();
    ck.put("meta.shape", Tensor<float>({3}, {static_cast<float>(model.cfg.in_channels),
                                             static_cast<float>(model.cfg.timesteps),
                                             static_cast<float>(model.cfg.num_classes)}));
    ck.put("meta.has_classifier", scalar_tensor(has_classifier ? 1.0f : 0.0f));
    for (auto& [name, var] : model.named_params()) ck.put(name, var->value);
    for (auto& [name, buf] : model.named_buffers()) ck.put(name, *buf);
    if (norm) {
        ck.put("norm.min", Tensor<float>({static_cast<int64_t>(norm->min.size())},
                                         std::vector<float>(norm->min)));
        ck.put("norm.max", Tensor<float>({static_cast<int64_t>(norm->max.size())},
                                         std::vector<float>(norm->max)));
    }
    if (adam && adam_param_names) {
        ck.put("adam.step", scalar_tensor(static_cast<float>(adam->step_count())));
        for (size_t i = 0; i < adam->size(); ++i) {
            ck.put("adam.m." + (*adam_param_names)[i], adam->moment1(i));
            ck.put("adam.v." + (*adam_param_names)[i], adam->moment2(i));
        }
    }
    return ck;
}

struct LoadedModel {
    ModelF model;
    RunConfig cfg;
    bool has_classifier = false;
    std::optional<NormStats> norm;
};

LoadedModel model_from_checkpoint(const Checkpoint& ck) {
    LoadedModel out;
    out.cfg = parse_config_text(ck.config_snapshot, "<checkpoint config>");
    const Tensor<float>* shape = ck.find("meta.shape");
    if (!shape || shape->numel() != 3) throw DataError("checkpoint: missing meta.shape");
    const ModelConfig mc = out.cfg.model_config(static_cast<int64_t>((*shape)[0]),
                                                static_cast<int64_t>((*shape)[1]),
                                                static_cast<int64_t>((*shape)[2]));
    out.model = ModelF::init(mc, RngStream(0));
    for (auto& [name, var] : out.model.named_params()) {
        const Tensor<float>* t = ck.find(name);
        if (!t) throw DataError("checkpoint: missing tensor '" + name + "'");
        if (!t->same_shape(var->value))
            throw DataError("checkpoint: tensor '" + name + "' has shape " + t->shape_str() +
                            ", expected " + var->value.shape_str());
        var->value = *t;
    }
    for (auto& [name, buf] : out.model.named_buffers()) {
        const Tensor<float>* t = ck.find(name);
        if (!t) throw DataError("checkpoint: missing tensor '" + name + "'");
        *buf = *t;
    }
    const Tensor<float>* hc = ck.find("meta.has_classifier");
    out.has_classifier = hc && (*hc)[0] != 0.0f;
    const Tensor<float>* nmin = ck.find("norm.min");
    const Tensor<float>* nmax = ck.find("norm.max");
    if (nmin && nmax) {
        NormStats ns;
        for (int64_t i = 0; i < nmin->numel(); ++i) ns.min.push_back((*nmin)[i]);
        for (int64_t i = 0; i < nmax->numel(); ++i) ns.max.push_back((*nmax)[i]);
        out.norm = ns;
    }
    return out;
}

std::vector<std::string> param_names(std::vector<std::pair<std::string, ad::Var<float>>> named,
                                     const std::vector<ad::Var<float>>& subset) {
    std::vector<std::string> out;
    for (const auto& v : subset) {
        for (auto& [name, var] : named)
            if (var == v) {
                out.push_back(name);
                break;
            }
    }
    return out;
}

// One unsupervised/class-aware training step on a view pair; returns the
// combined loss var and fills the record.
ad::Var<float> contrastive_step(ModelF& model, const RunConfig& cfg, const ViewPair& vp,
                                const std::vector<int64_t>* pair_labels, RngStream step_rng,
                                int64_t global_step, LossRecord& rec) {
    const bool semi = cfg.contextual == ContextualMode::sup;
    const int64_t horizon = model.cfg.horizon();
    const int64_t t_z = model.cfg.latent_timesteps();

    auto z_weak = model.encoder_forward(vp.weak.x, true, step_rng.split(1));
    auto z_strong = model.encoder_forward(vp.strong.x, true, step_rng.split(2));

    RngStream anchor_rng = step_rng.split(kTagAnchor);
    const int64_t anchor =
        1 + static_cast<int64_t>(anchor_rng.below(static_cast<uint64_t>(t_z - horizon)));

    TemporalBatchViews<float> views;
    views.z_weak = z_weak;
    views.z_strong = z_strong;
    views.c_weak =
        model.transformer_context(ad::time_prefix(z_weak, anchor), true, step_rng.split(3));
    views.c_strong =
        model.transformer_context(ad::time_prefix(z_strong, anchor), true, step_rng.split(4));
    views.anchor = anchor;
    views.horizon = horizon;

    auto l_tc_s = temporal_contrast_loss(
        views, model.predictors,
        cfg.cross_view ? Direction::strong_to_weak : Direction::strong_to_strong);
    auto l_tc_w = temporal_contrast_loss(
        views, model.predictors,
        cfg.cross_view ? Direction::weak_to_strong : Direction::weak_to_weak);
    check_finite(l_tc_s, "l_tc_strong", global_step);
    check_finite(l_tc_w, "l_tc_weak", global_step);
    rec.tc_s = l_tc_s->value[0];
    rec.tc_w = l_tc_w->value[0];

    ad::Var<float> total;
    if (cfg.contextual == ContextualMode::off) {
        const double lam = semi ? cfg.weights.lambda3 : cfg.weights.lambda1;
        total = ad::scale(ad::add(l_tc_s, l_tc_w), lam);
    } else {
        auto proj = ad::interleave_rows(model.projection_head_forward(views.c_weak),
                                        model.projection_head_forward(views.c_strong));
        ad::Var<float> l_ctx;
        if (semi) {
            if (!pair_labels) throw std::logic_error("contrastive_step: missing labels");
            l_ctx = supervised_contextual_contrast_loss(proj, *pair_labels, cfg.weights.tau,
                                                        !cfg.scc_raw_sum);
            check_finite(l_ctx, "l_scc", global_step);
            total = combine_semi(l_tc_s, l_tc_w, l_ctx, cfg.weights);
        } else {
            l_ctx = contextual_contrast_loss(proj, cfg.weights.tau);
            check_finite(l_ctx, "l_cc", global_step);
            total = combine_unsup(l_tc_s, l_tc_w, l_ctx, cfg.weights);
        }
        rec.ctx = l_ctx->value[0];
    }
    check_finite(total, "l_total", global_step);
    rec.total = total->value[0];
    return total;
}

Checkpoint contrastive_train(const RunConfig& cfg, const Dataset& data, ModelF model,
                             const char* phase_name, bool semi,
                             std::vector<LossRecord>* history, const NormStats* norm) {
    if (data.n() < 1) throw DataError(std::string(phase_name) + ": empty dataset");
    RunConfig local = cfg;
    local.contextual = semi ? (cfg.contextual == ContextualMode::off ? ContextualMode::off
                                                                     : ContextualMode::sup)
                            : (cfg.contextual == ContextualMode::sup ? ContextualMode::unsup
                                                                     : cfg.contextual);

    auto params = model.pretrain_params();
    Adam<float> adam(params);
    RngStream run_rng(cfg.seed);

    // All-zero loss weights mean the phase objective is identically zero;
    // there is nothing to optimize and parameters must not move.
    const bool no_objective = semi ? (cfg.weights.lambda3 == 0 && cfg.weights.lambda4 == 0)
                                   : (cfg.weights.lambda1 == 0 && cfg.weights.lambda2 == 0);

    const int64_t batch_size = std::min<int64_t>(cfg.batch_size, data.n());
    int64_t global_step = 0;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream epoch_rng = run_rng.split(kTagEpoch).split(static_cast<uint64_t>(epoch));
        BatchIterator batches(data, batch_size, epoch_rng.next_u64(), /*include_labels=*/semi);
        Batch batch;
        int64_t step_in_epoch = 0;
        while (batches.next(batch)) {
            RngStream step_rng = epoch_rng.split(1000 + static_cast<uint64_t>(step_in_epoch));
            ViewPair vp = make_view_pair(batch, local.augment, step_rng.split(0), local.views);

            std::vector<int64_t> pair_labels;
            if (semi) {
                pair_labels.reserve(batch.y.size() * 2);
                for (int64_t y : batch.y) {
                    if (y < 0)
                        throw DataError(std::string(phase_name) + ": unlabeled sample in batch");
                    pair_labels.push_back(y);
                    pair_labels.push_back(y);
                }
            }

            LossRecord rec;
            rec.phase = phase_name;
            rec.epoch = epoch;
            rec.step = global_step;
            auto total = contrastive_step(model, local, vp, semi ? &pair_labels : nullptr,
                                          step_rng, global_step, rec);
            if (!no_objective) {
                ad::backward(total);
                adam.step();
            }
            if (history) history->push_back(rec);
            ++global_step;
            ++step_in_epoch;
        }
    }
    auto names = param_names(model.named_params(), params);
    return make_checkpoint(model, cfg, /*has_classifier=*/false, norm, &adam, &names);
}

std::vector<int64_t> predict_with_model(ModelF& model, const Dataset& d, int64_t batch_size,
                                        Tensor<float>* confidence_out = nullptr) {
    std::vector<int64_t> pred;
    pred.reserve(static_cast<size_t>(d.n()));
    if (confidence_out) *confidence_out = Tensor<float>({d.n()});
    BatchIterator batches(d, batch_size, std::nullopt, /*include_labels=*/false);
    Batch batch;
    int64_t written = 0;
    RngStream dummy(0);
    while (batches.next(batch)) {
        auto z = model.encoder_forward(batch.x, false, dummy);
        auto logits = model.classifier_forward(z);
        const int64_t b = logits->value.dim(0), k = logits->value.dim(1);
        for (int64_t i = 0; i < b; ++i) {
            int64_t best = 0;
            for (int64_t c = 1; c < k; ++c)
                if (logits->value.at2(i, c) > logits->value.at2(i, best)) best = c;
            pred.push_back(best);
            if (confidence_out) {
                double mx = logits->value.at2(i, best);
                double denom = 0;
                for (int64_t c = 0; c < k; ++c)
                    denom += std::exp(static_cast<double>(logits->value.at2(i, c)) - mx);
                (*confidence_out)[written] = static_cast<float>(1.0 / denom);
            }
            ++written;
        }
    }
    return pred;
}

Metrics eval_model(ModelF& model, const Dataset& test) {
    const std::vector<int64_t> pred = predict_with_model(model, test, 256);
    return evaluate_metrics(pred, test.labels(), test.num_classes());
}

// Probe training for linear evaluation. A single affine layer on frozen
// features tolerates a much larger step size than full training; 3e-4 would
// need tens of thousands of steps to converge at desk scale.
constexpr double kProbeLearningRate = 1e-2;

void train_classifier_only(ModelF& model, const Dataset& labeled, const RunConfig& cfg,
                           std::vector<LossRecord>* history, const char* phase_name) {
    const int64_t batch_size = std::min<int64_t>(cfg.batch_size, labeled.n());
    AdamHyper hyper;
    hyper.lr = kProbeLearningRate;
    Adam<float> adam(model.classifier_params(), hyper);
    RngStream run_rng(cfg.seed);
    RngStream dummy(0);
    int64_t global_step = 0;
    for (int64_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
        RngStream epoch_rng = run_rng.split(kTagEpoch).split(static_cast<uint64_t>(epoch));
        BatchIterator batches(labeled, batch_size, epoch_rng.next_u64());
        Batch batch;
        while (batches.next(batch)) {
            auto z = model.encoder_forward(batch.x, false, dummy);
            auto features = ad::constant(ad::flatten2(z)->value);  // frozen encoder
            auto logits = ad::linear(features, model.cls_w, model.cls_b);
            auto loss = cross_entropy(logits, batch.y);
            check_finite(loss, "l_ce", global_step);
            ad::backward(loss);
            adam.step();
            if (history) {
                LossRecord rec;
                rec.phase = phase_name;
                rec.epoch = epoch;
                rec.step = global_step;
                rec.total = loss->value[0];
                rec.ce = loss->value[0];
                history->push_back(rec);
            }
            ++global_step;
        }
    }
}

}  // namespace

Protocol protocol_from_string(const std::string& s) {
    if (s == "tstcc") return Protocol::tstcc;
    if (s == "catcc") return Protocol::catcc;
    if (s == "supervised") return Protocol::supervised;
    if (s == "random_init") return Protocol::random_init;
    throw ConfigError("unknown protocol '" + s + "' (expected tstcc|catcc|supervised|random_init)");
}

std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::tstcc: return "tstcc";
        case Protocol::catcc: return "catcc";
        case Protocol::supervised: return "supervised";
        case Protocol::random_init: return "random_init";
    }
    return "?";
}

Checkpoint pretrain_tstcc(const RunConfig& cfg, const Dataset& train,
                          std::vector<LossRecord>* history, const NormStats* norm) {
    RunConfig local = cfg;
    if (local.contextual == ContextualMode::sup) local.contextual = ContextualMode::unsup;
    const ModelConfig mc =
        local.model_config(train.channels(), train.timesteps(), train.num_classes());
    ModelF model = ModelF::init(mc, RngStream(cfg.seed).split(kTagInit));
    return contrastive_train(local, train, std::move(model), "phase1", /*semi=*/false, history,
                             norm);
}

Checkpoint finetune(const Checkpoint& ckpt, const Dataset& labeled, const RunConfig& cfg,
                    std::vector<LossRecord>* history) {
    if (labeled.n() < 1) throw DataError("finetune: empty labeled set");
    if (!labeled.fully_labeled()) throw DataError("finetune: labeled set contains -1 labels");
    LoadedModel lm = model_from_checkpoint(ckpt);
    ModelF& model = lm.model;

    std::vector<ad::Var<float>> params = model.encoder_params();
    for (auto& p : model.classifier_params()) params.push_back(p);
    Adam<float> adam(params);
    RngStream run_rng(cfg.seed);

    const int64_t batch_size = std::min<int64_t>(cfg.batch_size, labeled.n());
    int64_t global_step = 0;
    for (int64_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
        RngStream epoch_rng = run_rng.split(kTagEpoch).split(static_cast<uint64_t>(epoch));
        BatchIterator batches(labeled, batch_size, epoch_rng.next_u64());
        Batch batch;
        int64_t step_in_epoch = 0;
        while (batches.next(batch)) {
            RngStream step_rng = epoch_rng.split(1000 + static_cast<uint64_t>(step_in_epoch));
            auto z = model.encoder_forward(batch.x, true, step_rng.split(1));
            auto logits = model.classifier_forward(z);
            auto loss = cross_entropy(logits, batch.y);
            check_finite(loss, "l_ce", global_step);
            ad::backward(loss);
            adam.step();
            if (history) {
                LossRecord rec;
                rec.phase = "finetune";
                rec.epoch = epoch;
                rec.step = global_step;
                rec.total = loss->value[0];
                rec.ce = loss->value[0];
                history->push_back(rec);
            }
            ++global_step;
            ++step_in_epoch;
        }
    }
    auto names = param_names(model.named_params(), params);
    return make_checkpoint(model, cfg, /*has_classifier=*/true,
                           lm.norm ? &*lm.norm : nullptr, &adam, &names);
}

PseudoLabeledDataset generate_pseudo_labels(const Checkpoint& ckpt, const Dataset& unlabeled,
                                            double confidence_threshold) {
    LoadedModel lm = model_from_checkpoint(ckpt);
    if (!lm.has_classifier)
        throw DataError("generate_pseudo_labels: checkpoint has no trained classifier");

    Tensor<float> confidence;
    const std::vector<int64_t> pred =
        predict_with_model(lm.model, unlabeled, 256, &confidence);

    int64_t truth_total = 0, truth_match = 0;
    std::vector<int64_t> keep;
    for (int64_t i = 0; i < unlabeled.n(); ++i) {
        if (confidence_threshold > 0 && confidence[i] < confidence_threshold) continue;
        keep.push_back(i);
        const int64_t truth = unlabeled.label(i);
        if (truth >= 0) {
            ++truth_total;
            if (truth == pred[static_cast<size_t>(i)]) ++truth_match;
        }
    }

    const int64_t c = unlabeled.channels(), t = unlabeled.timesteps();
    Tensor<float> xs({static_cast<int64_t>(keep.size()), c, t});
    std::vector<int64_t> ys(keep.size());
    for (size_t w = 0; w < keep.size(); ++w) {
        const int64_t src = keep[w];
        std::copy_n(unlabeled.samples().data() + src * c * t, c * t, xs.data() + static_cast<int64_t>(w) * c * t);
        ys[w] = pred[static_cast<size_t>(src)];
    }

    PseudoLabeledDataset out;
    out.data = Dataset(std::move(xs), std::move(ys), unlabeled.num_classes(), unlabeled.name());
    out.provenance = "finetuned-encoder";
    out.agreement = truth_total > 0 ? static_cast<double>(truth_match) /
                                          static_cast<double>(truth_total)
                                    : -1.0;
    return out;
}

Checkpoint train_catcc(const Checkpoint& ckpt, const Dataset& pseudo, const RunConfig& cfg,
                       std::vector<LossRecord>* history) {
    if (!pseudo.fully_labeled()) throw DataError("train_catcc: pseudo dataset has -1 labels");
    LoadedModel lm = model_from_checkpoint(ckpt);
    lm.model.reinit_context_modules(RngStream(cfg.seed).split(kTagInit + 1));
    RunConfig local = cfg;
    local.contextual =
        cfg.contextual == ContextualMode::off ? ContextualMode::off : ContextualMode::sup;
    return contrastive_train(local, pseudo, std::move(lm.model), "phase4", /*semi=*/true, history,
                             lm.norm ? &*lm.norm : nullptr);
}

Metrics linear_evaluate(const Checkpoint& ckpt, const Dataset& train_labeled, const Dataset& test,
                        const RunConfig& cfg) {
    if (!test.fully_labeled()) throw DataError("linear_evaluate: test set must be labeled");
    LoadedModel lm = model_from_checkpoint(ckpt);
    ModelF& model = lm.model;

    std::set<int64_t> present(train_labeled.labels().begin(), train_labeled.labels().end());
    for (int64_t c = 0; c < train_labeled.num_classes(); ++c)
        if (!present.count(c))
            std::cerr << "warning: class " << c << " absent from linear-evaluation training set\n";

    // fresh probe head
    RngStream head_rng = RngStream(cfg.seed).split(kTagLinearHead);
    const int64_t feat = model.cfg.feature_dim * model.cfg.latent_timesteps();
    const double bound = 1.0 / std::sqrt(static_cast<double>(feat));
    Tensor<float> w({model.cfg.num_classes, feat});
    for (int64_t i = 0; i < w.numel(); ++i)
        w[i] = static_cast<float>(bound * (2.0 * head_rng.uniform() - 1.0));
    model.cls_w = ad::parameter(std::move(w));
    model.cls_b = ad::parameter(Tensor<float>({model.cfg.num_classes}));

    train_classifier_only(model, train_labeled, cfg, nullptr, "linear");
    return eval_model(model, test);
}

Metrics evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& test) {
    LoadedModel lm = model_from_checkpoint(ckpt);
    if (!lm.has_classifier)
        throw DataError("evaluate_checkpoint: checkpoint has no trained classifier");
    return eval_model(lm.model, test);
}

std::vector<int64_t> predict_labels(const Checkpoint& ckpt, const Dataset& d) {
    LoadedModel lm = model_from_checkpoint(ckpt);
    if (!lm.has_classifier) throw DataError("predict_labels: checkpoint has no trained classifier");
    return predict_with_model(lm.model, d, 256);
}

Checkpoint init_checkpoint(const RunConfig& cfg, int64_t in_channels, int64_t timesteps,
                           int64_t num_classes, const NormStats* norm) {
    const ModelConfig mc = cfg.model_config(in_channels, timesteps, num_classes);
    ModelF model = ModelF::init(mc, RngStream(cfg.seed).split(kTagInit));
    return make_checkpoint(model, cfg, /*has_classifier=*/false, norm);
}

void write_metrics_csv(const std::string& path, const std::vector<LossRecord>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "phase,epoch,step,l_total,l_tc_s,l_tc_w,l_ctx,l_ce\n";
    out.precision(9);
    for (const auto& r : history) {
        out << r.phase << ',' << r.epoch << ',' << r.step << ',' << r.total << ',';
        if (r.tc_s) out << *r.tc_s;
        out << ',';
        if (r.tc_w) out << *r.tc_w;
        out << ',';
        if (r.ctx) out << *r.ctx;
        out << ',';
        if (r.ce) out << *r.ce;
        out << '\n';
    }
}

void write_report_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "protocol,seed,labels_fraction,accuracy,mf1";
    for (size_t c = 0; c < report.test.f1.size(); ++c) out << ",f1_" << c;
    out << '\n';
    out.precision(9);
    out << protocol_name(report.protocol) << ',' << report.seed << ',' << report.labels_fraction
        << ',' << report.test.accuracy << ',' << report.test.mf1;
    for (double f : report.test.f1) out << ',' << f;
    out << '\n';
}

RunReport run_protocol(Protocol protocol, const RunConfig& cfg) {
    cfg.validate();
    if (cfg.train_path.empty() || cfg.test_path.empty())
        throw ConfigError("run: train and test dataset paths are required");
    Dataset train = load_dataset(cfg.train_path);
    Dataset test = load_dataset(cfg.test_path);
    if (train.channels() != test.channels() || train.timesteps() != test.timesteps() ||
        train.num_classes() != test.num_classes())
        throw DataError("run: train and test datasets have different shapes");
    cfg.augment.validate(train.timesteps());

    std::optional<NormStats> norm;
    if (cfg.normalize) {
        norm = compute_minmax(train);
        train = apply_minmax(train, *norm);
        test = apply_minmax(test, *norm);
    }
    const NormStats* norm_ptr = norm ? &*norm : nullptr;

    Dataset labeled = train;
    Dataset unlabeled;
    bool have_unlabeled = false;
    if (cfg.labels_fraction < 1.0) {
        LabeledSplit split = split_labeled_subset(train, cfg.labels_fraction, cfg.seed);
        labeled = std::move(split.labeled);
        unlabeled = std::move(split.unlabeled);
        have_unlabeled = unlabeled.n() > 0;
    }

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream snap(cfg.out_dir + "/config.snapshot", std::ios::trunc);
        snap << cfg.snapshot();
    }

    std::vector<LossRecord> history;
    RunReport report;
    report.protocol = protocol;
    report.seed = cfg.seed;
    report.labels_fraction = cfg.labels_fraction;

    auto eval_final = [&](const Checkpoint& pretrained, const Checkpoint& finetuned) {
        if (cfg.eval == EvalMode::linear)
            return linear_evaluate(pretrained, labeled, test, cfg);
        return evaluate_checkpoint(finetuned, test);
    };

    switch (protocol) {
        case Protocol::tstcc: {
            Checkpoint ph1 = pretrain_tstcc(cfg, train, &history, norm_ptr);
            save_checkpoint(ph1, cfg.out_dir + "/phase1.ckpt");
            Checkpoint ph2 = finetune(ph1, labeled, cfg, &history);
            save_checkpoint(ph2, cfg.out_dir + "/phase2.ckpt");
            save_checkpoint(ph2, cfg.out_dir + "/final.ckpt");
            report.test = eval_final(ph1, ph2);
            break;
        }
        case Protocol::catcc: {
            Checkpoint ph1 = pretrain_tstcc(cfg, train, &history, norm_ptr);
            save_checkpoint(ph1, cfg.out_dir + "/phase1.ckpt");
            Checkpoint ph2 = finetune(ph1, labeled, cfg, &history);
            save_checkpoint(ph2, cfg.out_dir + "/phase2.ckpt");

            Dataset phase4_data = labeled;
            Checkpoint ph3 = ph2;
            if (have_unlabeled) {
                PseudoLabeledDataset pseudo =
                    generate_pseudo_labels(ph2, unlabeled, cfg.pseudo_threshold);
                ph3.put("pseudo.agreement", scalar_tensor(static_cast<float>(pseudo.agreement)));
                ph3.put("pseudo.count", scalar_tensor(static_cast<float>(pseudo.data.n())));
                save_dataset(pseudo.data, cfg.out_dir + "/phase3_pseudo.tsd");
                phase4_data = concat_datasets(labeled, pseudo.data);
            }
            save_checkpoint(ph3, cfg.out_dir + "/phase3.ckpt");

            Checkpoint ph4 = train_catcc(ph2, phase4_data, cfg, &history);
            save_checkpoint(ph4, cfg.out_dir + "/phase4.ckpt");

            Checkpoint final_ck = finetune(ph4, labeled, cfg, &history);
            save_checkpoint(final_ck, cfg.out_dir + "/final.ckpt");
            report.test = eval_final(ph4, final_ck);
            break;
        }
        case Protocol::supervised: {
            Checkpoint fresh =
                init_checkpoint(cfg, train.channels(), train.timesteps(), train.num_classes(),
                                norm_ptr);
            Checkpoint trained = finetune(fresh, labeled, cfg, &history);
            save_checkpoint(trained, cfg.out_dir + "/final.ckpt");
            report.test = evaluate_checkpoint(trained, test);
            break;
        }
        case Protocol::random_init: {
            Checkpoint fresh =
                init_checkpoint(cfg, train.channels(), train.timesteps(), train.num_classes(),
                                norm_ptr);
            save_checkpoint(fresh, cfg.out_dir + "/final.ckpt");
            report.test = linear_evaluate(fresh, labeled, test, cfg);
            break;
        }
    }

    write_metrics_csv(cfg.out_dir + "/metrics.csv", history);
    write_report_csv(cfg.out_dir + "/report.csv", report);
    return report;
}

}  // namespace tstcc
