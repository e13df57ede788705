#include "vstar/errors.hpp"

namespace vstar {

const char* to_string(TerminationCause c) {
    switch (c) {
        case TerminationCause::none: return "none";
        case TerminationCause::causality: return "causality";
        case TerminationCause::corrector_positivity: return "corrector-positivity";
        case TerminationCause::diffeomorphism_loss: return "diffeomorphism-loss";
        case TerminationCause::resolution: return "resolution";
        case TerminationCause::instability: return "instability";
        case TerminationCause::gauge_incompatibility: return "gauge-incompatibility";
    }
    return "?";
}

int exit_code(TerminationCause c) {
    switch (c) {
        case TerminationCause::none: return 0;
        case TerminationCause::causality: return 10;
        case TerminationCause::corrector_positivity: return 11;
        case TerminationCause::diffeomorphism_loss: return 12;
        case TerminationCause::resolution: return 13;
        case TerminationCause::instability: return 14;
        case TerminationCause::gauge_incompatibility: return 15;
    }
    return 1;
}

} // namespace vstar
