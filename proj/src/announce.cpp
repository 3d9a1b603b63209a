#include "percept/announce.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

namespace percept {

Policy Policy::parse(const std::string& text) {
    Policy p;
    if (text == "once") {
        p.mode = Mode::Once;
        return p;
    }
    if (text.rfind("interval:", 0) == 0) {
        p.mode = Mode::FixedInterval;
        p.period_s = std::stod(text.substr(9));
        if (!(p.period_s > 0)) throw std::invalid_argument("policy: period must be > 0");
        return p;
    }
    if (text.rfind("tooclose:", 0) == 0) {
        p.mode = Mode::TooClose;
        p.tooclose_mm = std::stoi(text.substr(9));
        if (p.tooclose_mm < 20) throw std::invalid_argument("policy: threshold below 20 mm");
        return p;
    }
    throw std::invalid_argument("policy: expected 'interval:N', 'once' or 'tooclose:MM'");
}

std::string direction_for_column(int col, int cam_cols) {
    if (cam_cols <= 1) return "ahead";
    const double frac = (col + 0.5) / cam_cols;
    if (frac < 1.0 / 3.0) return "left";
    if (frac > 2.0 / 3.0) return "right";
    return "ahead";
}

std::string format_message(const Detection& d, int cam_cols) {
    const std::string dir = direction_for_column(d.cell_col, cam_cols);
    std::string msg;
    if (d.distance_mm) {
        msg = d.class_name + " " + dir + " at " + std::to_string(*d.distance_mm) +
              " millimeters";
    } else {
        msg = d.class_name + " " + dir + ", distance unknown";
    }
    if (msg.size() > 120) msg.resize(120);
    return msg;
}

std::vector<Announcement> schedule(const Policy& policy, const std::vector<TimedDetection>& stream,
                                   int cam_cols) {
    struct ClassState {
        bool announced = false;
        double last_announce = 0.0;
        bool seen = false;
        double last_seen = 0.0;
    };
    std::map<std::string, ClassState> state;
    std::vector<Announcement> out;
    double prev_t = -1e300;
    for (const auto& td : stream) {
        if (td.t < prev_t) {
            throw std::invalid_argument("schedule: detection timestamps must be non-decreasing");
        }
        prev_t = td.t;
        ClassState& cs = state[td.det.class_name];
        bool fire = false;
        switch (policy.mode) {
            case Policy::Mode::FixedInterval:
                fire = !cs.announced || td.t - cs.last_announce >= policy.period_s;
                break;
            case Policy::Mode::Once: {
                const bool new_interval = !cs.seen || td.t - cs.last_seen >= policy.once_reset_s;
                fire = new_interval;
                break;
            }
            case Policy::Mode::TooClose:
                fire = td.det.distance_mm && *td.det.distance_mm < policy.tooclose_mm &&
                       (!cs.announced || td.t - cs.last_announce >= policy.min_repeat_s);
                break;
        }
        cs.seen = true;
        cs.last_seen = td.t;
        if (fire) {
            Announcement a;
            a.t = td.t;
            a.text = format_message(td.det, cam_cols);
            a.urgent = td.det.distance_mm && *td.det.distance_mm < policy.tooclose_mm;
            out.push_back(std::move(a));
            cs.announced = true;
            cs.last_announce = td.t;
        }
    }
    return out;
}

namespace {

class StreamSink : public AnnouncementSink {
public:
    explicit StreamSink(std::ostream& out) : out_(out) {}
    void deliver(const Announcement& a, std::ostream& warn) override {
        out_ << a.text << "\n";
        out_.flush();
        if (!out_) warn << "warning: announcement sink write failed\n";
    }

private:
    std::ostream& out_;
};

class FileSink : public AnnouncementSink {
public:
    explicit FileSink(const std::string& path) : path_(path), out_(path, std::ios::app) {}
    void deliver(const Announcement& a, std::ostream& warn) override {
        if (!out_) {
            warn << "warning: cannot open announcement file " << path_ << "\n";
            return;
        }
        out_ << a.text << "\n";
        out_.flush();
        if (!out_) warn << "warning: write to " << path_ << " failed\n";
    }

private:
    std::string path_;
    std::ofstream out_;
};

class CommandSink : public AnnouncementSink {
public:
    explicit CommandSink(std::string tmpl) : template_(std::move(tmpl)) {}
    void deliver(const Announcement& a, std::ostream& warn) override {
        std::string quoted = "'";
        for (char c : a.text) {
            if (c == '\'') {
                quoted += "'\\''";
            } else {
                quoted += c;
            }
        }
        quoted += "'";
        std::string cmd = template_;
        bool substituted = false;
        size_t pos = 0;
        while ((pos = cmd.find("{}", pos)) != std::string::npos) {
            cmd.replace(pos, 2, quoted);
            pos += quoted.size();
            substituted = true;
        }
        if (!substituted) cmd += " " + quoted;
        int rc = std::system(cmd.c_str());
        if (rc != 0) {
            warn << "warning: speak command exited with status " << rc << "\n";
        }
    }

private:
    std::string template_;
};

}  // namespace

std::unique_ptr<AnnouncementSink> make_stream_sink(std::ostream& out) {
    return std::make_unique<StreamSink>(out);
}

std::unique_ptr<AnnouncementSink> make_file_sink(const std::string& path) {
    return std::make_unique<FileSink>(path);
}

std::unique_ptr<AnnouncementSink> make_command_sink(const std::string& command_template) {
    return std::make_unique<CommandSink>(command_template);
}

void emit(const Announcement& a, AnnouncementSink& sink, std::ostream* warn) {
    sink.deliver(a, warn ? *warn : std::cerr);
}

}  // namespace percept
