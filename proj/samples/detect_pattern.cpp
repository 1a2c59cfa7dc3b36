// Runs both detectors on one noisy benchmark pattern and prints precision / recall / F.
#include <cstdio>
#include <cstdlib>

#include "faintedge/faintedge.hpp"

using namespace faintedge;

int main(int argc, char** argv) {
    const double snr = argc > 1 ? std::atof(argv[1]) : 2.0;
    const TestPattern pat = generate_test_pattern({129, snr});
    const GrayImage img = add_gaussian_noise(pat.image, {1.0, 7});

    for (Detector d : {Detector::lines, Detector::curves_stringent}) {
        RunConfig cfg;
        cfg.detector = d;
        if (d != Detector::lines) cfg.params.beta = calibrate_beta(cfg, 5, 1000).beta;
        const EdgeSet edges = run_detector(img, cfg);
        const EvalResult r = f_measure(rasterize(edges), pat.truth, cfg.match_tol);
        std::printf("%-17s snr %.2f  edges %4zu  P %.3f  R %.3f  F %.3f\n", to_string(d).c_str(), snr, edges.size(),
                    r.precision, r.recall, r.f_measure);
    }
    save_image("pattern_noisy.png", normalized_for_display(img, 8), ImageFormat::png, {8, true});
    return 0;
}
