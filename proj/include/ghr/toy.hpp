// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "ghr/grad_check.hpp"
#include "ghr/model.hpp"

namespace ghr {

/// A two-frame video with a small vocabulary, sized so the whole model can be
/// differentiated numerically in seconds.
struct ToySample {
    Vocabulary vocab;
    VideoGraph graph;
    ModelConfig config;
    Tensor<double> question;
    std::size_t answer = 0;
};

ToySample make_toy_sample(std::uint64_t seed);

struct ToyGradCheck {
    GradCheckReport report;
    std::size_t parameters = 0;
    double seconds = 0.0;
};

/// Encoder, both CRN levels, decoder and cross-entropy in double precision
/// against central differences.
ToyGradCheck toy_grad_check(std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace ghr
