#pragma once

#include <vector>

#include "sparseids/model.hpp"
#include "sparseids/rl_sampler.hpp"

namespace sparseids {

// one recurrent step + dense head + sigmoid; advances only the classifier state
double classify_packet(const Model& model, const Vec& features, Model::EvalState& state);

// mean binary cross-entropy between consumed confidences and the flow label
double classifier_loss(const std::vector<double>& confidences, int label);

// numerically stable BCE on the pre-sigmoid logit: softplus(z) - y z
double bce_from_logit(double logit, int label);

// verdict = 1 iff the last consumed packet's confidence >= 0.5
int flow_verdict(const EpisodeTrace& trace);

}  // namespace sparseids
