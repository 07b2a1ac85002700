#pragma once

#include "lmesens/kkt.hpp"
#include "lmesens/lme.hpp"

namespace lmesens {

/// Forward mode: solves d1F X = -d2F for all NT demand directions and
/// contracts the generation rows of X with the emission rates.
///
/// Right-hand sides are processed in fixed blocks of 64 columns that are
/// spread over `parallelism` workers, so the result does not depend on the
/// worker count. Only one block of X is alive per worker.
LmeResult lme_forward_central(const DispatchCase& c, const DispatchSolution& solution,
                              const KktSystem& kkt, std::size_t parallelism = 1);

/// Reverse mode: one factorization and one transposed solve with the
/// emission rates embedded in the generation rows.
LmeResult lme_reverse_central(const DispatchCase& c, const DispatchSolution& solution,
                              const KktSystem& kkt);

}  // namespace lmesens
