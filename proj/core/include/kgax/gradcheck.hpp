#pragma once

// Built-in 64-bit finite-difference suite over the complete training loss on
// a fixed six-entity fixture.

#include <cstdint>
#include <string>
#include <vector>

#include "kgax/config.hpp"
#include "kgax/numeric.hpp"
#include "kgax/propagation.hpp"
#include "kgax/recommender.hpp"
#include "kgax/transr.hpp"

namespace kgax {

/// Users u0, u1; items i0, i1, i2; token t0 attached to i0 and i2. Four train
/// interactions, relations interact and has_aux (plus inverses), two layers,
/// fusion on, dropout off.
struct GradcheckFixture {
  Dataset data;
  ModelConfig config;
  ModelContext context;
  Neighborhoods neighborhoods;
  std::vector<RecTriple> rec_batch;
  KGBatch kg_batch;
  ModelParameters<double> params;
};

GradcheckFixture make_gradcheck_fixture(std::uint64_t seed = 11);

enum class LossTerms { Kg, Rec, Full };

/// KG pair loss, BPR batch loss or their sum at `params`; accumulates gradients when non-null.
double fixture_loss(const GradcheckFixture& fixture, const ModelParameters<double>& params, LossTerms terms,
                    ModelParameters<double>* grads);

struct GradcheckCase {
  std::string name;
  GradCheckReport report;
};

/// Runs "transr", "bpr-propagation" and "full". `analytic_scale` multiplies
/// the analytic gradient (1 for a real check; anything else is a negative control).
std::vector<GradcheckCase> run_gradcheck_suite(double h = 1e-4, double tol = 1e-5, double analytic_scale = 1.0);

}  // namespace kgax
