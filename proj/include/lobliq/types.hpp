#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lobliq {

/// Price expressed as an integer number of ticks.
using Tick = std::int64_t;
/// Order volume in shares.
using Volume = std::int64_t;
/// Durations and timestamps are microseconds; timestamps count from session open.
using Duration = std::chrono::microseconds;
using Timestamp = std::chrono::microseconds;

enum class Op : std::uint8_t { LO, MO, C };

/// Side of the order message.
enum class Side : std::uint8_t { Buy, Sell };

/// Side of the resting book.
enum class BookSide : std::uint8_t { Bid, Ask };

/// Sign of a large price fluctuation.
enum class Sign : std::int8_t { Negative = -1, Positive = 1 };

/// Book side where an order of this side rests.
constexpr BookSide resting_side(Side s) { return s == Side::Buy ? BookSide::Bid : BookSide::Ask; }

/// Book side an aggressive order of this side executes against.
constexpr BookSide contra_side(Side s) { return s == Side::Buy ? BookSide::Ask : BookSide::Bid; }

constexpr BookSide opposite(BookSide s) { return s == BookSide::Bid ? BookSide::Ask : BookSide::Bid; }
constexpr Side opposite(Side s) { return s == Side::Buy ? Side::Sell : Side::Buy; }
constexpr Sign opposite(Sign s) { return s == Sign::Positive ? Sign::Negative : Sign::Positive; }

const char* to_string(Op op);
const char* to_string(Side s);
const char* to_string(BookSide s);
const char* to_string(Sign s);

enum class Errc {
    rejected_message,
    off_grid,
    no_liquidity,
    inconsistent_stream,
    empty_side,
    parse_error,
    stream_order,
    insufficient_sample,
    fit_error,
    domain_error,
    parameter_error,
    normalization_error,
    config_error,
    feasibility_error,
    io_error,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Malformed input line; `line` is 1-based.
class ParseError : public Error {
public:
    ParseError(Errc code, std::size_t line, const std::string& what)
        : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Book error raised while replaying, tagged with the 0-based event index.
class ReplayError : public Error {
public:
    ReplayError(Errc code, std::size_t event_index, const std::string& what)
        : Error(code, "event " + std::to_string(event_index) + ": " + what), index_(event_index) {}

    [[nodiscard]] std::size_t event_index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace lobliq
