#include "midframe/train.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

namespace midframe {

namespace {

struct PreparedSample {
  Image frame0, frame1, gt;
  WarpPair pair;
  DenseFlow f01;
  const DenseFlow* label = nullptr;
};

}  // namespace

TrainResult train_fusion(const std::vector<TrainTriplet>& dataset, FusionModel& model,
                         const PipelineOptions& flow_opts, const TrainHyperparams& hp) {
  if (dataset.empty()) throw DataError("training dataset is empty");
  if (hp.steps < 0) throw DataError("steps must be >= 0");

  // Flows and warps do not depend on the weights; prepare them once.
  std::vector<PreparedSample> samples;
  samples.reserve(dataset.size());
  for (const TrainTriplet& t : dataset) {
    if (!t.frame0.same_shape(t.frame1) || !t.frame0.same_shape(t.gt))
      throw DataError("triplet frames have mismatched dimensions");
    PreparedSample s;
    s.frame0 = promote_to_rgb(t.frame0);
    s.frame1 = promote_to_rgb(t.frame1);
    s.gt = promote_to_rgb(t.gt);
    auto [f01, f10] = estimate_bidirectional(s.frame0, s.frame1, flow_opts);
    s.pair = make_warp_pair(s.frame0, s.frame1, f01, f10, Timestep(0.5f));
    s.f01 = std::move(f01);
    s.label = t.flow_label ? &*t.flow_label : nullptr;
    samples.push_back(std::move(s));
  }

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(hp.steps));
  const double inv_batch = 1.0 / static_cast<double>(samples.size());

  for (int step = 0; step < hp.steps; ++step) {
    model.weights().zero_grad();
    LossBreakdown mean{};
    mean.lambda = hp.lambda;
    for (PreparedSample& s : samples) {
      auto trace = std::make_unique<FusionModel::Trace>();
      const Image pred = model.forward_train(s.frame0, s.frame1, s.pair, *trace);
      const LossBreakdown lb =
          total_loss(pred, s.gt, s.f01, s.label, hp.lambda);
      mean.l_rec += lb.l_rec * inv_batch;
      mean.l_cen += lb.l_cen * inv_batch;
      mean.l_dis += lb.l_dis * inv_batch;

      // Census is piecewise constant and the distillation term has no
      // parameters upstream, so the parameter gradient comes from L_rec.
      Image grad = reconstruction_loss_grad(pred, s.gt);
      for (float& g : grad.data) g = static_cast<float>(g * inv_batch);
      model.backward(*trace, grad);
    }
    mean.total = mean.l_rec + mean.l_cen + mean.lambda * mean.l_dis;
    if (!std::isfinite(mean.total)) {
      std::string last = "none";
      if (!result.history.empty())
        last = "step " + std::to_string(result.history.size() - 1) + " total " +
               std::to_string(result.history.back().total);
      throw NumericError("training diverged at step " + std::to_string(step) +
                         " (last finite: " + last + ")");
    }
    result.history.push_back(mean);
    adamw_step(model.weights(), hp.lr, hp.beta1, hp.beta2, hp.eps, hp.weight_decay);
  }
  return result;
}

void write_loss_history_csv(const TrainResult& result, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write " + path);
  std::fprintf(f, "step,l_rec,l_cen,l_dis,total\n");
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const LossBreakdown& lb = result.history[i];
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g\n", i, lb.l_rec, lb.l_cen, lb.l_dis,
                 lb.total);
  }
  std::fclose(f);
}

}  // namespace midframe
