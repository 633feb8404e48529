#pragma once

#include <string>
#include <variant>

namespace svsc {

enum class OptionKind { Call, Put };
enum class BarrierStyle { KnockOut, KnockIn };
enum class BarrierDirection { Up, Down };
enum class DigitalKind { Above, Below };

struct Vanilla {
    double strike = 1.0;
    double expiry = 1.0;
    OptionKind kind = OptionKind::Call;
};

// Continuously monitored single barrier on a vanilla, no rebate.
struct BarrierOption {
    Vanilla underlying;
    double barrier = 1.0;
    BarrierStyle style = BarrierStyle::KnockOut;
    BarrierDirection direction = BarrierDirection::Down;
};

// Pays one unit of the denominated currency at expiry if the barrier was touched.
struct OneTouch {
    double barrier = 1.0;
    double expiry = 1.0;
    BarrierDirection direction = BarrierDirection::Down;
};

// Pays one unit at expiry if spot finishes above (below) the strike.
struct EuropeanDigital {
    double strike = 1.0;
    double expiry = 1.0;
    DigitalKind kind = DigitalKind::Above;
};

using Instrument = std::variant<Vanilla, EuropeanDigital, OneTouch, BarrierOption>;

double expiry_of(const Instrument& inst);
std::string describe(const Instrument& inst);

// The barrier has been reached when spot sits at or beyond it.
inline bool is_breached(double spot, double barrier, BarrierDirection dir) {
    return dir == BarrierDirection::Down ? spot <= barrier : spot >= barrier;
}

// Out-of-the-money barrier: the underlying vanilla is OTM when spot sits at the barrier.
inline bool is_otm_barrier(const BarrierOption& opt) {
    const double k = opt.underlying.strike;
    return opt.underlying.kind == OptionKind::Call ? opt.barrier <= k : opt.barrier >= k;
}

const char* to_string(OptionKind k);
const char* to_string(BarrierDirection d);
const char* to_string(BarrierStyle s);
const char* to_string(DigitalKind k);

}  // namespace svsc
