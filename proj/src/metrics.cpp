#include "fieldswarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "fieldswarm/environment.hpp"

namespace fieldswarm {

std::vector<TrajectoryRecord> parse_trajectory(std::istream& in) {
    std::vector<TrajectoryRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw TrajectoryParseError(number, "malformed JSON");
        try {
            out.push_back(trajectory_record_from_json(j));
        } catch (const std::exception& e) {
            throw TrajectoryParseError(number, e.what());
        }
    }
    return out;
}

std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory file " + path.string());
    return parse_trajectory(in);
}

Json to_json(const MetricsReport& r) {
    auto number_or_null = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
    Json per_agent_poi = Json::object();
    for (const auto& [id, v] : r.per_agent_mean_distance_to_nearest_poi) per_agent_poi[id] = number_or_null(v);
    return Json{{"min_pairwise_distance", number_or_null(r.min_pairwise_distance)},
                {"boundary_violations", r.boundary_violations},
                {"mean_distance_to_nearest_poi", number_or_null(r.mean_distance_to_nearest_poi)},
                {"per_agent_mean_distance_to_nearest_poi", std::move(per_agent_poi)},
                {"per_agent_path_length", r.per_agent_path_length},
                {"records", r.records}};
}

std::vector<Position2D> points_of_interest_at(const EnvironmentConfig& env, std::int64_t t_ms) {
    if (env.modulation_points.empty()) return {};
    const std::int64_t ticks = t_ms >= 0 ? t_ms / env.delay_ms + 1 : 0;
    return rotate_points(env.modulation_points, env.rotation_center,
                         env.theta_degrees * static_cast<double>(ticks));
}

MetricsReport compute_metrics(const std::vector<TrajectoryRecord>& records, const EnvironmentConfig& env,
                              const MetricsOptions& options) {
    MetricsReport report;

    std::map<std::string, std::vector<TrajectoryRecord>> by_agent;
    {
        std::set<std::pair<std::string, std::int64_t>> seen;
        for (const auto& r : records) {
            if (r.t_ms < options.from_ms || r.t_ms >= options.to_ms) continue;
            if (!seen.emplace(r.agent_id, r.t_ms).second) continue;
            by_agent[r.agent_id].push_back(r);
        }
    }
    for (auto& [_, recs] : by_agent) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
    }

    std::set<std::int64_t> buckets;
    double poi_sum = 0.0;
    std::size_t poi_count = 0;
    std::map<std::int64_t, std::vector<Position2D>> poi_cache;

    for (const auto& [id, recs] : by_agent) {
        double path = 0.0;
        double agent_poi_sum = 0.0;
        for (std::size_t k = 0; k < recs.size(); ++k) {
            const auto& r = recs[k];
            const Position2D p{r.x, r.y};
            ++report.records;
            buckets.insert(r.t_ms);
            if (!env.limits.contains(p)) ++report.boundary_violations;
            if (k > 0) path += distance({recs[k - 1].x, recs[k - 1].y}, p);

            auto it = poi_cache.find(r.t_ms);
            if (it == poi_cache.end()) it = poi_cache.emplace(r.t_ms, points_of_interest_at(env, r.t_ms)).first;
            if (!it->second.empty()) {
                double nearest = std::numeric_limits<double>::infinity();
                for (const auto& q : it->second) nearest = std::min(nearest, distance(p, q));
                agent_poi_sum += nearest;
            }
        }
        report.per_agent_path_length[id] = path;
        if (!env.modulation_points.empty() && !recs.empty()) {
            report.per_agent_mean_distance_to_nearest_poi[id] = agent_poi_sum / static_cast<double>(recs.size());
            poi_sum += agent_poi_sum;
            poi_count += recs.size();
        }
    }
    if (poi_count > 0) report.mean_distance_to_nearest_poi = poi_sum / static_cast<double>(poi_count);

    // Pairwise distances at every timestamp, each agent represented by its
    // record nearest in time within the tolerance.
    std::vector<const std::vector<TrajectoryRecord>*> tracks;
    for (const auto& [_, recs] : by_agent) tracks.push_back(&recs);
    std::vector<Position2D> aligned;
    for (std::int64_t t : buckets) {
        aligned.clear();
        for (const auto* recs : tracks) {
            auto it = std::lower_bound(recs->begin(), recs->end(), t,
                                       [](const TrajectoryRecord& r, std::int64_t v) { return r.t_ms < v; });
            const TrajectoryRecord* best = nullptr;
            std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
            if (it != recs->end()) {
                best = &*it;
                best_gap = it->t_ms - t;
            }
            if (it != recs->begin()) {
                auto prev = std::prev(it);
                if (t - prev->t_ms < best_gap) {
                    best = &*prev;
                    best_gap = t - prev->t_ms;
                }
            }
            if (best != nullptr && best_gap <= options.alignment_tolerance_ms) aligned.push_back({best->x, best->y});
        }
        for (std::size_t a = 0; a < aligned.size(); ++a) {
            for (std::size_t b = a + 1; b < aligned.size(); ++b) {
                report.min_pairwise_distance = std::min(report.min_pairwise_distance, distance(aligned[a], aligned[b]));
            }
        }
    }
    return report;
}

MetricsReport compute_metrics(const std::filesystem::path& trajectory_file, const EnvironmentConfig& env,
                              const MetricsOptions& options) {
    return compute_metrics(read_trajectory(trajectory_file), env, options);
}

}  // namespace fieldswarm
