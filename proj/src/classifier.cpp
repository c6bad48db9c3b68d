#include "sparseids/classifier.hpp"

#include <cmath>
#include <stdexcept>

namespace sparseids {

double classify_packet(const Model& model, const Vec& features, Model::EvalState& state) {
  return model.step(features, state, false, false).confidence;
}

double bce_from_logit(double logit, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce: label must be 0 or 1");
  return softplus(logit) - static_cast<double>(label) * logit;
}

double classifier_loss(const std::vector<double>& confidences, int label) {
  if (confidences.empty())
    throw std::invalid_argument("classifier loss needs at least one consumed packet");
  if (label != 0 && label != 1)
    throw std::invalid_argument("classifier loss: label must be 0 or 1");
  double total = 0.0;
  for (double p : confidences) {
    if (!(p > 0.0) || !(p < 1.0))
      throw std::invalid_argument("classifier loss: confidence outside (0,1)");
    total += label == 1 ? -std::log(p) : -std::log1p(-p);
  }
  return total / static_cast<double>(confidences.size());
}

int flow_verdict(const EpisodeTrace& trace) {
  if (trace.confidences.empty())
    throw std::invalid_argument("flow verdict needs at least one consumed packet");
  return trace.confidences.back() >= 0.5 ? 1 : 0;
}

}  // namespace sparseids
