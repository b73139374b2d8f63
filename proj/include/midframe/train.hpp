#pragma once

#include <optional>
#include <string>
#include <vector>

#include "midframe/fusion_net.hpp"
#include "midframe/losses.hpp"
#include "midframe/pipeline.hpp"

namespace midframe {

struct TrainTriplet {
  Image frame0, gt, frame1;
  std::optional<DenseFlow> flow_label;  // distillation target for the forward flow
};

struct TrainHyperparams {
  int steps = 500;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 1e-4f;
  double lambda = 0.1;
};

struct TrainResult {
  std::vector<LossBreakdown> history;  // one averaged breakdown per step
};

// Full-batch fine-tuning of the fusion stage. Flows come from the configured
// analytical estimator, are computed once per triplet and stay fixed; only
// the context/fusion weights learn. Aborts with a diagnostic when the loss
// stops being finite. Deterministic for a fixed model seed.
TrainResult train_fusion(const std::vector<TrainTriplet>& dataset, FusionModel& model,
                         const PipelineOptions& flow_opts,
                         const TrainHyperparams& hp);

void write_loss_history_csv(const TrainResult& result, const std::string& path);

}  // namespace midframe
