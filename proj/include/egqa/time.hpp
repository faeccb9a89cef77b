#pragma once
// Day-scoped timestamps. Times of day are stored as HHMMSS integers
// (e.g. 132609 for 13:26:09); arithmetic converts to seconds on demand.

#include <compare>
#include <cstdint>
#include <cstdio>
#include <regex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace egqa {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kSecondsPerDay = 86400;

inline int encode_time(int hour, int minute, int second) {
    if (hour < 0 || hour >= 24 || minute < 0 || minute >= 60 || second < 0 || second >= 60)
        throw ValidationError("encode_time: component out of range: " + std::to_string(hour) +
                              ":" + std::to_string(minute) + ":" + std::to_string(second));
    return hour * 10000 + minute * 100 + second;
}

inline std::tuple<int, int, int> decode_time(int code) {
    if (code < 0 || code > 235959)
        throw ValidationError("decode_time: code out of range: " + std::to_string(code));
    int hour = code / 10000;
    int minute = (code / 100) % 100;
    int second = code % 100;
    if (hour >= 24 || minute >= 60 || second >= 60)
        throw ValidationError("decode_time: invalid digit field in " + std::to_string(code));
    return {hour, minute, second};
}

inline bool is_valid_hhmmss(int code) {
    if (code < 0 || code > 235959) return false;
    return (code / 100) % 100 < 60 && code % 100 < 60;
}

// Seconds since 00:00:00 of the same day.
inline int hhmmss_to_seconds(int code) {
    auto [h, m, s] = decode_time(code);
    return h * 3600 + m * 60 + s;
}

inline int seconds_to_hhmmss(int seconds) {
    if (seconds < 0 || seconds >= kSecondsPerDay)
        throw ValidationError("seconds_to_hhmmss: out of range");
    return encode_time(seconds / 3600, (seconds / 60) % 60, seconds % 60);
}

// A moment within a multi-day recording: (day, HHMMSS).
// Ordering is (day, t) lexicographic.
struct DayTime {
    int day = 1;
    int t = 0;  // HHMMSS

    auto operator<=>(const DayTime&) const = default;

    void validate() const {
        if (day < 1) throw ValidationError("DayTime: day must be >= 1");
        if (!is_valid_hhmmss(t))
            throw ValidationError("DayTime: invalid HHMMSS " + std::to_string(t));
    }

    // Seconds from day 1, 00:00:00, treating each recorded day as
    // day_length_s long.
    std::int64_t absolute_seconds(std::int64_t day_length_s = kSecondsPerDay) const {
        return static_cast<std::int64_t>(day - 1) * day_length_s + hhmmss_to_seconds(t);
    }
};

inline std::int64_t seconds_between(const DayTime& a, const DayTime& b,
                                    std::int64_t day_length_s = kSecondsPerDay) {
    if (day_length_s <= 0) throw ValidationError("seconds_between: day_length_s must be > 0");
    std::int64_t d = a.absolute_seconds(day_length_s) - b.absolute_seconds(day_length_s);
    return d < 0 ? -d : d;
}

// Closed interval within a single day.
struct TimeInterval {
    DayTime start;
    DayTime end;

    void validate() const {
        start.validate();
        end.validate();
        if (start.day != end.day)
            throw ValidationError("TimeInterval: intervals may not cross a day boundary");
        if (end < start) throw ValidationError("TimeInterval: end precedes start");
    }

    int day() const { return start.day; }

    bool operator==(const TimeInterval&) const = default;
};

// Closed-interval intersection between two intervals, day-aware.
inline bool intervals_intersect(const TimeInterval& a, const TimeInterval& b) {
    return !(a.end < b.start) && !(b.end < a.start);
}

// Text form used in files and on the CLI: "D4 11:34:00".
inline std::string format_daytime(const DayTime& dt) {
    auto [h, m, s] = decode_time(dt.t);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "D%d %02d:%02d:%02d", dt.day, h, m, s);
    return buf;
}

inline DayTime parse_daytime(const std::string& text) {
    static const std::regex re(R"(^\s*[Dd](\d+)\s+(\d{1,2}):(\d{2}):(\d{2})\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re))
        throw ValidationError("parse_daytime: expected \"D<day> HH:MM:SS\", got \"" + text + "\"");
    DayTime dt{std::stoi(m[1]), encode_time(std::stoi(m[2]), std::stoi(m[3]), std::stoi(m[4]))};
    dt.validate();
    return dt;
}

// Scan free text for cited timestamps: "D2 15:50:21" carries its own day,
// bare "15:50:21" inherits default_day. Malformed components are skipped.
inline std::vector<DayTime> parse_cited_timestamps(const std::string& text, int default_day) {
    static const std::regex re(R"((?:[Dd](?:ay)?\s*(\d+)[ ,]\s*(?:at\s+)?)?(\d{1,2}):(\d{2}):(\d{2}))");
    std::vector<DayTime> out;
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const std::smatch& m = *it;
        int day = m[1].matched ? std::stoi(m[1]) : default_day;
        int h = std::stoi(m[2]), mi = std::stoi(m[3]), s = std::stoi(m[4]);
        if (day < 1 || h >= 24 || mi >= 60 || s >= 60) continue;
        out.push_back({day, encode_time(h, mi, s)});
    }
    return out;
}

}  // namespace egqa
