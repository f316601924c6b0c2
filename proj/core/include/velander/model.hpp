#pragma once

#include <span>

#include "velander/types.hpp"

namespace velander {

// Peak and consumption of a single profile. Energy is expressed in kW times
// the 15-minute reference interval regardless of the profile's own interval.
CustomerRecord compute_features(const LoadProfile& profile);

// alpha * E + beta * sqrt(E)
double velander_quantile(double energy, double alpha, double beta);

// Pinball (check) loss of `predicted` as the tau-quantile of `observed`.
double pinball_loss(double observed, double predicted, double tau);

// Mean pinball loss over every (record, level) pair.
double average_pinball_loss(std::span<const CustomerRecord> records,
                            const QuantileParamSet& params);

// Pairwise (cascade) summation; result is independent of thread layout.
double pairwise_sum(std::span<const double> values);

}  // namespace velander
