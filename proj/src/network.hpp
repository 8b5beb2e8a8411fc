#pragma once

#include <span>

#include "ldbp/autograd.hpp"
#include "ldbp/model.hpp"

namespace ldbp::detail {

// out[k] = sum_d h_d in[(k D - d) mod n] for k < out.size().
void convolve_decimated(std::span<const cplx> in, const SymmetricFilter& filter,
                        std::size_t decimation, std::span<cplx> out);

// Shared by forward() and forward_with_tape(); records into tape if given.
SymbolBlock run_network(const LdbpModel& model, const ComplexSignal& y, Tape* tape);

}  // namespace ldbp::detail
