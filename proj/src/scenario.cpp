#include "iftw/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace iftw {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParseError(line, "expected a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        const std::int64_t d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParseError(line, "expected an integer, got '" + v + "'");
    }
}

std::vector<double> parse_list(const std::string& v, int line) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(item, line));
    }
    if (out.empty()) throw ParseError(line, "expected a non-empty list");
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

std::int64_t default_appear_tick(const TopologyConfig& cfg) {
    const Topology topo = build_topology(cfg);
    return (topo.node_count() + 2) * cfg.slot_ticks;
}

ScenarioFile parse_scenario(const std::string& text, bool strict_interference) {
    ScenarioFile sc;
    bool saw_topology = false;
    bool saw_delta = false;
    std::string section;
    Obstacle* cur_obstacle = nullptr;

    std::istringstream is(text);
    std::string raw;
    int ln = 0;
    while (std::getline(is, raw)) {
        ++ln;
        std::string line = raw;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(ln, "unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section == "topology") {
                saw_topology = true;
            } else if (section == "obstacle") {
                sc.obstacles.push_back({});
                cur_obstacle = &sc.obstacles.back();
                cur_obstacle->appear_tick = -1;  // filled after parse
            } else if (section == "sweep") {
                if (sc.sweep) throw ParseError(ln, "duplicate [sweep] section");
                sc.sweep = SweepGrid{};
            } else if (section == "random") {
                if (sc.random) throw ParseError(ln, "duplicate [random] section");
                sc.random = RandomSpec{};
            } else if (section == "output") {
            } else {
                throw ParseError(ln, "unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(ln, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (section.empty())
            throw ParseError(ln, "key '" + key + "' outside any section");

        if (section == "topology") {
            auto& c = sc.config;
            if (key == "road_width_m") c.road_width_m = parse_double(val, ln);
            else if (key == "road_length_m") c.road_length_m = parse_double(val, ln);
            else if (key == "theta_deg") c.theta_deg = parse_double(val, ln);
            else if (key == "phi_deg") c.phi_deg = parse_double(val, ln);
            else if (key == "slot_ticks") c.slot_ticks = parse_int(val, ln);
            else if (key == "control_slot_ticks") c.control_slot_ticks = parse_int(val, ln);
            else if (key == "detection_interval_ticks") {
                c.detection_interval_ticks = parse_int(val, ln);
                saw_delta = true;
            } else throw ParseError(ln, "unknown topology key '" + key + "'");
        } else if (section == "obstacle") {
            auto& o = *cur_obstacle;
            if (key == "x_m") o.center.x = parse_double(val, ln);
            else if (key == "y_m") o.center.y = parse_double(val, ln);
            else if (key == "radius_m") o.radius = parse_double(val, ln);
            else if (key == "appear_tick") o.appear_tick = parse_int(val, ln);
            else throw ParseError(ln, "unknown obstacle key '" + key + "'");
        } else if (section == "sweep") {
            auto& g = *sc.sweep;
            if (key == "x_min_m") g.x_min = parse_double(val, ln);
            else if (key == "x_max_m") g.x_max = parse_double(val, ln);
            else if (key == "x_step_m") g.x_step = parse_double(val, ln);
            else if (key == "y_min_m") g.y_min = parse_double(val, ln);
            else if (key == "y_max_m") g.y_max = parse_double(val, ln);
            else if (key == "y_step_m") g.y_step = parse_double(val, ln);
            else if (key == "radii_m") g.radii = parse_list(val, ln);
            else if (key == "appear_tick") g.appear_tick = parse_int(val, ln);
            else throw ParseError(ln, "unknown sweep key '" + key + "'");
        } else if (section == "random") {
            auto& r = *sc.random;
            if (key == "count") r.count = static_cast<int>(parse_int(val, ln));
            else if (key == "seed") r.seed = static_cast<std::uint64_t>(parse_int(val, ln));
            else if (key == "radii_m") r.radii = parse_list(val, ln);
            else if (key == "appear_tick") r.appear_tick = parse_int(val, ln);
            else throw ParseError(ln, "unknown random key '" + key + "'");
        } else if (section == "output") {
            if (key == "report") sc.output.report_path = val;
            else if (key == "trace_dir") sc.output.trace_dir = val;
            else throw ParseError(ln, "unknown output key '" + key + "'");
        }
    }

    if (!saw_topology) throw ValidationError("missing [topology] section");
    if (!saw_delta)
        sc.config.detection_interval_ticks = 8 * sc.config.control_slot_ticks;
    try {
        sc.config.validate();
    } catch (const InvalidGeometry& e) {
        throw ValidationError(e.what());
    }
    if (sc.config.detection_interval_ticks <
        5 * sc.config.control_slot_ticks)
        throw ValidationError(
            "detection interval too small for one probe plus a table share");

    const int modes = (sc.obstacles.empty() ? 0 : 1) + (sc.sweep ? 1 : 0) +
                      (sc.random ? 1 : 0);
    if (modes == 0)
        throw ValidationError("need an [obstacle], [sweep] or [random] section");
    if (modes > 1)
        throw ValidationError(
            "[obstacle], [sweep] and [random] are mutually exclusive");

    const Topology topo = build_topology(sc.config);
    const std::int64_t appear0 = default_appear_tick(sc.config);
    for (Obstacle& o : sc.obstacles) {
        if (o.appear_tick < 0) o.appear_tick = appear0;
        if (o.radius < 0) throw ValidationError("obstacle radius must be >= 0");
        if (o.center.x < 0 || o.center.x > sc.config.road_length_m ||
            o.center.y < 0 || o.center.y > sc.config.road_width_m)
            throw ValidationError("obstacle centre outside the road rectangle");
    }
    if (sc.sweep) {
        auto& g = *sc.sweep;
        if (g.x_step <= 0 || g.y_step <= 0)
            throw ValidationError("sweep steps must be > 0");
        if (g.x_max < g.x_min || g.y_max < g.y_min)
            throw ValidationError("empty sweep grid");
        if (g.radii.empty()) throw ValidationError("sweep needs radii");
        for (double r : g.radii)
            if (r < 0) throw ValidationError("sweep radius must be >= 0");
    }
    if (sc.random) {
        if (sc.random->count <= 0)
            throw ValidationError("[random] count must be > 0");
        if (sc.random->radii.empty())
            throw ValidationError("[random] needs radii");
    }

    const auto margin =
        interference_free_margin(sc.config.theta_deg, sc.config.phi_deg);
    if (!margin.satisfied) {
        std::ostringstream os;
        os << "interference-free condition violated: margin "
           << fmt(margin.margin_deg) << " deg <= phi/2 = "
           << fmt(sc.config.phi_deg / 2) << " deg";
        if (strict_interference) throw ValidationError(os.str());
        sc.warnings.push_back(os.str());
    }
    (void)topo;
    return sc;
}

std::string emit_scenario(const ScenarioFile& sc) {
    std::ostringstream os;
    os << "[topology]\n";
    os << "road_width_m = " << fmt(sc.config.road_width_m) << "\n";
    os << "road_length_m = " << fmt(sc.config.road_length_m) << "\n";
    os << "theta_deg = " << fmt(sc.config.theta_deg) << "\n";
    os << "phi_deg = " << fmt(sc.config.phi_deg) << "\n";
    os << "slot_ticks = " << sc.config.slot_ticks << "\n";
    os << "control_slot_ticks = " << sc.config.control_slot_ticks << "\n";
    os << "detection_interval_ticks = " << sc.config.detection_interval_ticks
       << "\n";
    for (const Obstacle& o : sc.obstacles) {
        os << "\n[obstacle]\n";
        os << "x_m = " << fmt(o.center.x) << "\n";
        os << "y_m = " << fmt(o.center.y) << "\n";
        os << "radius_m = " << fmt(o.radius) << "\n";
        os << "appear_tick = " << o.appear_tick << "\n";
    }
    if (sc.sweep) {
        const auto& g = *sc.sweep;
        os << "\n[sweep]\n";
        os << "x_min_m = " << fmt(g.x_min) << "\n";
        os << "x_max_m = " << fmt(g.x_max) << "\n";
        os << "x_step_m = " << fmt(g.x_step) << "\n";
        os << "y_min_m = " << fmt(g.y_min) << "\n";
        os << "y_max_m = " << fmt(g.y_max) << "\n";
        os << "y_step_m = " << fmt(g.y_step) << "\n";
        os << "radii_m = ";
        for (std::size_t i = 0; i < g.radii.size(); ++i)
            os << (i ? "," : "") << fmt(g.radii[i]);
        os << "\n";
        if (g.appear_tick) os << "appear_tick = " << *g.appear_tick << "\n";
    }
    if (sc.random) {
        const auto& r = *sc.random;
        os << "\n[random]\n";
        os << "count = " << r.count << "\n";
        os << "seed = " << r.seed << "\n";
        os << "radii_m = ";
        for (std::size_t i = 0; i < r.radii.size(); ++i)
            os << (i ? "," : "") << fmt(r.radii[i]);
        os << "\n";
        if (r.appear_tick) os << "appear_tick = " << *r.appear_tick << "\n";
    }
    if (!sc.output.report_path.empty() || !sc.output.trace_dir.empty()) {
        os << "\n[output]\n";
        if (!sc.output.report_path.empty())
            os << "report = " << sc.output.report_path << "\n";
        if (!sc.output.trace_dir.empty())
            os << "trace_dir = " << sc.output.trace_dir << "\n";
    }
    return os.str();
}

std::vector<Obstacle> enumerate_cells(const ScenarioFile& sc) {
    std::vector<Obstacle> cells;
    const std::int64_t appear0 = default_appear_tick(sc.config);
    if (sc.sweep) {
        const auto& g = *sc.sweep;
        const std::int64_t at = g.appear_tick.value_or(appear0);
        const int nx = static_cast<int>(std::floor((g.x_max - g.x_min) / g.x_step + 1e-9)) + 1;
        const int ny = static_cast<int>(std::floor((g.y_max - g.y_min) / g.y_step + 1e-9)) + 1;
        for (int ix = 0; ix < nx; ++ix)
            for (int iy = 0; iy < ny; ++iy)
                for (double r : g.radii)
                    cells.push_back({{g.x_min + ix * g.x_step,
                                      g.y_min + iy * g.y_step},
                                     r,
                                     at});
    } else if (sc.random) {
        const auto& rs = *sc.random;
        const std::int64_t at = rs.appear_tick.value_or(appear0);
        std::mt19937_64 rng(rs.seed);
        std::uniform_real_distribution<double> ux(0.0, sc.config.road_length_m);
        std::uniform_real_distribution<double> uy(0.0, sc.config.road_width_m);
        std::uniform_int_distribution<std::size_t> ur(0, rs.radii.size() - 1);
        for (int i = 0; i < rs.count; ++i)
            cells.push_back({{ux(rng), uy(rng)}, rs.radii[ur(rng)], at});
    } else {
        cells = sc.obstacles;
    }
    return cells;
}

void SweepReport::finalize() {
    std::map<std::string, int> buckets;
    blockage_cells = 0;
    agreeing_cells = 0;
    double det_sum = 0, rec_sum = 0;
    int det_n = 0, rec_n = 0;
    for (const auto& c : cells) {
        const auto& r = c.result;
        if (r.rounds.empty()) {
            buckets["none"]++;
            continue;
        }
        blockage_cells++;
        if (r.agreement) agreeing_cells++;
        const auto typed = r.detected_typed();
        if (typed.size() == 1)
            buckets[to_string(typed.front().first)]++;
        else
            buckets["combo"]++;
        const auto t0 = r.first_onset();
        for (const auto& round : r.rounds)
            if (round.classify_tick && t0) {
                det_sum += static_cast<double>(*round.classify_tick - *t0);
                det_n++;
                break;
            }
        if (r.recovery_tick && t0) {
            rec_sum += static_cast<double>(*r.recovery_tick - *t0);
            rec_n++;
        }
    }
    histogram.assign(buckets.begin(), buckets.end());
    agreement_rate =
        blockage_cells ? static_cast<double>(agreeing_cells) / blockage_cells
                       : 0.0;
    mean_detection_latency = det_n ? det_sum / det_n : 0.0;
    mean_recovery_latency = rec_n ? rec_sum / rec_n : 0.0;
}

std::string SweepReport::table_tsv() const {
    std::ostringstream os;
    os << "x\ty\tradius\toutcome\tonset\tleader\toracle\tdetected\tagree"
          "\tbypass\trecovery\n";
    for (const auto& c : cells) {
        const auto& r = c.result;
        os << fmt(c.obstacle.center.x) << '\t' << fmt(c.obstacle.center.y)
           << '\t' << fmt(c.obstacle.radius) << '\t' << to_string(r.outcome)
           << '\t';
        if (auto t0 = r.first_onset())
            os << *t0;
        else
            os << "-";
        os << '\t';
        if (!r.rounds.empty())
            os << r.rounds.front().leader;
        else
            os << "-";
        os << '\t' << to_string(r.oracle) << '\t';
        std::ostringstream det;
        bool first = true;
        for (const auto& round : r.rounds)
            for (const auto& e : round.detected.entries) {
                det << (first ? "" : "+") << to_string(e.type) << "@N"
                    << e.affected_node;
                first = false;
            }
        os << (first ? "none" : det.str()) << '\t'
           << (r.agreement ? "1" : "0") << '\t';
        std::ostringstream byp;
        bool any = false;
        for (const auto& round : r.rounds)
            if (round.prm) {
                byp << (any ? "+" : "") << to_string(round.prm->new_path.front());
                any = true;
            }
        os << (any ? byp.str() : "-") << '\t';
        if (r.recovery_tick)
            os << *r.recovery_tick;
        else
            os << "-";
        os << '\n';
    }
    return os.str();
}

std::string SweepReport::summary() const {
    std::ostringstream os;
    os << "cells: " << cells.size() << "\n";
    os << "blockage-producing cells: " << blockage_cells << "\n";
    if (blockage_cells == 0) {
        os << "agreement rate: no blockages\n";
    } else {
        os << "agreement rate: " << std::fixed << std::setprecision(4)
           << agreement_rate << "\n";
    }
    os << "verdict histogram:";
    for (const auto& [k, v] : histogram) os << " " << k << "=" << v;
    os << "\n";
    os << "mean detection latency (ticks): " << std::fixed
       << std::setprecision(1) << mean_detection_latency << "\n";
    os << "mean recovery latency (ticks): " << std::fixed
       << std::setprecision(1) << mean_recovery_latency << "\n";
    return os.str();
}

SweepReport run_sweep(const ScenarioFile& sc, int workers) {
    const std::vector<Obstacle> cells = enumerate_cells(sc);
    SweepReport report;
    report.cells.resize(cells.size());

    const bool multi = !sc.sweep && !sc.random && cells.size() > 1;
    auto run_cell = [&](std::size_t i) {
        Simulation sim(sc.config, {cells[i]}, {});
        report.cells[i] = {cells[i], sim.run()};
    };

    if (multi) {
        // Several [obstacle] sections form one scenario, not a sweep.
        Simulation sim(sc.config, cells, {});
        report.cells.resize(1);
        report.cells[0] = {cells.front(), sim.run()};
    } else if (workers > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (long long i = 0; i < static_cast<long long>(cells.size()); ++i)
            run_cell(static_cast<std::size_t>(i));
#else
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
#endif
    } else {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    }

    for (const auto& c : report.cells)
        if (c.result.outcome == Outcome::NonTermination)
            throw NonTermination(
                "cell at (" + fmt(c.obstacle.center.x) + "," +
                fmt(c.obstacle.center.y) + ") r=" + fmt(c.obstacle.radius) +
                " missed the recovery deadline");

    report.finalize();
    return report;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace iftw
