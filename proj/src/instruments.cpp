#include "svsc/instruments.hpp"

#include <sstream>
#include <type_traits>

namespace svsc {

const char* to_string(OptionKind k) { return k == OptionKind::Call ? "call" : "put"; }
const char* to_string(BarrierDirection d) { return d == BarrierDirection::Up ? "up" : "down"; }
const char* to_string(BarrierStyle s) { return s == BarrierStyle::KnockOut ? "knockout" : "knockin"; }
const char* to_string(DigitalKind k) { return k == DigitalKind::Above ? "above" : "below"; }

double expiry_of(const Instrument& inst) {
    return std::visit(
        [](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, BarrierOption>)
                return x.underlying.expiry;
            else
                return x.expiry;
        },
        inst);
}

std::string describe(const Instrument& inst) {
    std::ostringstream os;
    std::visit(
        [&os](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Vanilla>) {
                os << to_string(x.kind) << " K=" << x.strike << " T=" << x.expiry;
            } else if constexpr (std::is_same_v<T, EuropeanDigital>) {
                os << "digital-" << to_string(x.kind) << " K=" << x.strike << " T=" << x.expiry;
            } else if constexpr (std::is_same_v<T, OneTouch>) {
                os << "one-touch-" << to_string(x.direction) << " B=" << x.barrier << " T=" << x.expiry;
            } else {
                os << to_string(x.direction) << "-" << to_string(x.style) << " "
                   << to_string(x.underlying.kind) << " K=" << x.underlying.strike
                   << " B=" << x.barrier << " T=" << x.underlying.expiry;
            }
        },
        inst);
    return os.str();
}

}  // namespace svsc
