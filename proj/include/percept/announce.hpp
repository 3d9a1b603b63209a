#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "percept/detection.hpp"

namespace percept {

struct Announcement {
    double t = 0.0;  // seconds
    std::string text;
    bool urgent = false;
};

// User-selected announcement cadence: every period seconds per class, once
// per presence interval, or only when an obstacle is within a threshold.
struct Policy {
    enum class Mode { FixedInterval, Once, TooClose } mode = Mode::Once;
    double period_s = 5.0;        // FixedInterval
    double once_reset_s = 10.0;   // Once: silence gap that ends a presence interval
    int tooclose_mm = 1000;       // TooClose threshold; also marks urgency
    double min_repeat_s = 1.0;    // TooClose rate limit per class

    // "interval:N" | "once" | "tooclose:MM"
    static Policy parse(const std::string& text);
};

// left / ahead / right by horizontal thirds of the camera grid.
std::string direction_for_column(int col, int cam_cols);

// "<class> <direction> at <z> millimeters", or ", distance unknown" without
// a range. Never exceeds 120 characters.
std::string format_message(const Detection& d, int cam_cols = 3);

struct TimedDetection {
    double t = 0.0;
    Detection det;
};

// Applies the policy to a time-ordered detection stream. Timestamps must be
// non-decreasing. Output is time-ordered and deterministic.
std::vector<Announcement> schedule(const Policy& policy, const std::vector<TimedDetection>& stream,
                                   int cam_cols = 3);

// Announcement sinks. Failures are reported on the warning stream and never
// abort the pipeline.
class AnnouncementSink {
public:
    virtual ~AnnouncementSink() = default;
    virtual void deliver(const Announcement& a, std::ostream& warn) = 0;
};

std::unique_ptr<AnnouncementSink> make_stream_sink(std::ostream& out);
std::unique_ptr<AnnouncementSink> make_file_sink(const std::string& path);
// Command template; every "{}" is replaced with the quoted message (appended
// if absent). Nonzero exit status is logged as a warning.
std::unique_ptr<AnnouncementSink> make_command_sink(const std::string& command_template);

void emit(const Announcement& a, AnnouncementSink& sink, std::ostream* warn = nullptr);

}  // namespace percept
