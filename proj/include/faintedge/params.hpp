#pragma once

#include "faintedge/error.hpp"
#include "faintedge/thresholds.hpp"

namespace faintedge {

struct SuppressionParams {
    double overlap_fraction = 0.52;
    double hausdorff_tol = 2.0;

    void validate() const {
        if (!(overlap_fraction > 0.0 && overlap_fraction < 1.0)) throw ParameterError("overlap_fraction must lie in (0, 1)");
        if (!(hausdorff_tol >= 1.0 && hausdorff_tol <= 3.0)) throw ParameterError("hausdorff_tol must lie in [1, 3]");
    }
};

enum class BeamMode { stringent, greedy };

struct DetectorParams {
    int w = 4;              // filter width, even
    int s = 1;              // gap between the two filter halves (line detector)
    double sigma = 1.0;     // noise level
    double delta = 0.5;     // false-alarm budget
    double beta = 0.65;     // beam-curve search-space growth
    int k = 40;             // interface points scanned in greedy mode
    int max_length = 0;     // longest line level to build, 0 = as long as the image allows
    int cct_depth = 3;      // line segments are split into 2^cct_depth pieces for the consistency test
    bool consistent_contrast = true;
    SuppressionParams suppression;

    ThresholdParams thresholds() const { return {sigma, w, delta, beta}; }

    void validate() const {
        thresholds().validate();
        if (s < 0) throw ParameterError("spacing s must be nonnegative");
        if (k < 1) throw ParameterError("greedy k must be at least 1");
        if (max_length < 0) throw ParameterError("max_length must be nonnegative");
        if (cct_depth < 0 || cct_depth > 8) throw ParameterError("cct_depth must lie in [0, 8]");
        suppression.validate();
    }
};

}  // namespace faintedge
