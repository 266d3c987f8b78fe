#pragma once

#include "tstcc/checkpoint.hpp"
#include "tstcc/config.hpp"
#include "tstcc/dataset.hpp"
#include "tstcc/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tstcc {

// One logged training step; fields that do not apply to a phase stay unset.
struct LossRecord {
    std::string phase;
    int64_t epoch = 0;
    int64_t step = 0;
    double total = 0;
    std::optional<double> tc_s, tc_w, ctx, ce;
};

struct PseudoLabeledDataset {
    Dataset data;            // predictions written into the labels, no -1 left
    std::string provenance;  // which checkpoint produced the labels
    double agreement = -1;   // fraction matching ground truth; -1 when unknown
};

enum class Protocol { tstcc, catcc, supervised, random_init };

Protocol protocol_from_string(const std::string& s);
std::string protocol_name(Protocol p);

struct RunReport {
    Protocol protocol = Protocol::tstcc;
    uint64_t seed = 0;
    double labels_fraction = 1.0;
    Metrics test;
};

// ---- phase-level API -------------------------------------------------------
// Datasets are expected to be normalized already; run_protocol takes care of
// that. Norm stats, when given, ride along in the checkpoints so later phases
// and test-time evaluation scale data consistently.

// Phase 1: self-supervised pretraining. Never reads labels.
Checkpoint pretrain_tstcc(const RunConfig& cfg, const Dataset& train,
                          std::vector<LossRecord>* history = nullptr,
                          const NormStats* norm = nullptr);

// Phase 2 (and the supervised baseline): joint encoder + classifier training
// with cross entropy; transformer and projection head stay frozen.
Checkpoint finetune(const Checkpoint& ckpt, const Dataset& labeled, const RunConfig& cfg,
                    std::vector<LossRecord>* history = nullptr);

// Phase 3: argmax predictions as labels (ties break to the lowest class).
// Samples whose label is >= 0 are treated as diagnostics truth.
PseudoLabeledDataset generate_pseudo_labels(const Checkpoint& ckpt, const Dataset& unlabeled,
                                            double confidence_threshold = 0.0);

// Phase 4: class-aware training from the fine-tuned encoder; the contextual
// term becomes the supervised one and the semi-supervised weights apply.
Checkpoint train_catcc(const Checkpoint& ckpt, const Dataset& pseudo, const RunConfig& cfg,
                       std::vector<LossRecord>* history = nullptr);

// Trains a fresh linear classifier on the frozen encoder and scores `test`.
Metrics linear_evaluate(const Checkpoint& ckpt, const Dataset& train_labeled, const Dataset& test,
                        const RunConfig& cfg);

// Scores the checkpoint's own classifier on `test`.
Metrics evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& test);

std::vector<int64_t> predict_labels(const Checkpoint& ckpt, const Dataset& d);

// Fresh random model as a checkpoint (random-init baseline, supervised start).
Checkpoint init_checkpoint(const RunConfig& cfg, int64_t in_channels, int64_t timesteps,
                           int64_t num_classes, const NormStats* norm = nullptr);

// ---- end-to-end ------------------------------------------------------------

// Executes the named recipe, writes the run directory (config.snapshot,
// phase checkpoints, metrics.csv, report.csv) and returns the report.
RunReport run_protocol(Protocol protocol, const RunConfig& cfg);

void write_report_csv(const std::string& path, const RunReport& report);
void write_metrics_csv(const std::string& path, const std::vector<LossRecord>& history);

}  // namespace tstcc
