#include "mfglab/params.hpp"

namespace mfg {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::TerminalCost: return "terminal_cost";
        case Variant::Planning: return "planning";
        case Variant::InfiniteHorizon: return "infinite_horizon";
    }
    return "terminal_cost";
}

Variant variant_from_string(const std::string& s) {
    if (s == "terminal_cost") return Variant::TerminalCost;
    if (s == "planning") return Variant::Planning;
    if (s == "infinite_horizon") return Variant::InfiniteHorizon;
    throw std::domain_error("unknown variant: " + s);
}

} // namespace mfg
