#pragma once

// Hand-built message streams with a fully controlled midprice path.

#include <cstdlib>
#include <vector>

#include "lobliq/ingestion.hpp"

namespace support {

using namespace lobliq;

// Both sides are unit-volume ladders, contiguous from the best outward, with
// a one-tick spread. step(t, k) moves the midprice by exactly k ticks: a
// crossing LO eats k levels and rests one share, then the gap left behind on
// its own side is refilled. Every frame of a step shares its timestamp and,
// after the first one, the new midprice.
class PathBuilder {
public:
    PathBuilder(Timestamp t, Tick bid, int depth = 600) : bid_(bid), ask_(bid + 1) {
        add(Op::LO, Side::Buy, bid_, 1, t);
        add(Op::LO, Side::Sell, ask_, 1, t);
        for (int d = 1; d < depth; ++d) {
            add(Op::LO, Side::Buy, bid_ - d, 1, t);
            add(Op::LO, Side::Sell, ask_ + d, 1, t);
        }
    }

    void step(Timestamp t, int k) {
        if (k > 0) {
            add(Op::LO, Side::Buy, ask_ + k - 1, k + 1, t);
            for (Tick p = ask_; p <= ask_ + k - 2; ++p) add(Op::LO, Side::Buy, p, 1, t);
            bid_ = ask_ + k - 1;
            ask_ = bid_ + 1;
        } else if (k < 0) {
            const int m = -k;
            add(Op::LO, Side::Sell, bid_ - m + 1, m + 1, t);
            for (Tick p = bid_ - m + 2; p <= bid_; ++p) add(Op::LO, Side::Sell, p, 1, t);
            ask_ = bid_ - m + 1;
            bid_ = ask_ - 1;
        }
    }

    // Frame that leaves the bests alone.
    void idle(Timestamp t) { add(Op::LO, Side::Buy, bid_ - 400, 1, t); }

    [[nodiscard]] Tick bid() const { return bid_; }
    [[nodiscard]] Tick ask() const { return ask_; }
    [[nodiscard]] double mid_ticks() const { return (static_cast<double>(bid_) + static_cast<double>(ask_)) / 2.0; }
    [[nodiscard]] const std::vector<OrderEvent>& events() const { return events_; }

private:
    void add(Op op, Side s, Tick p, Volume v, Timestamp t) { events_.push_back({op, s, p, v, t, {}}); }

    Tick bid_;
    Tick ask_;
    std::vector<OrderEvent> events_;
};

}  // namespace support
