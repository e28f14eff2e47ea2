#ifndef SPVB_SPVB_HPP
#define SPVB_SPVB_HPP

#include "spvb/cli_io.hpp"
#include "spvb/core_model.hpp"
#include "spvb/errors.hpp"
#include "spvb/eval_harness.hpp"
#include "spvb/likelihood_approx.hpp"
#include "spvb/mcmc_oracle.hpp"
#include "spvb/predict.hpp"
#include "spvb/sparsify.hpp"
#include "spvb/special_math.hpp"
#include "spvb/vb_bernoulli.hpp"
#include "spvb/vb_laplace.hpp"
#include "spvb/vb_spike_slab.hpp"

#endif  // SPVB_SPVB_HPP
