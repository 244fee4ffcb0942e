#include "destrack/event_study/event_study.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"

namespace destrack::event_study {

EventMapping map_events(std::span<const EventRecord> events, const raster::PatchGrid& grid,
                        const raster::GeoTransform& geo, int width, int height, std::span<const Date> image_dates) {
    EventMapping m;
    m.event_index.assign(grid.size(), std::nullopt);
    for (const auto& e : events) {
        const auto id = raster::point_to_patch(grid, geo, width, height, e.lonlat);
        if (!id) {
            ++m.dropped_outside;
            continue;
        }
        const auto it = std::lower_bound(image_dates.begin(), image_dates.end(), e.date);
        if (it == image_dates.end()) {
            ++m.dropped_date;
            continue;
        }
        const std::size_t t = it - image_dates.begin();
        auto& slot = m.event_index[*grid.index_of(*id)];
        if (!slot || t < *slot) slot = t;
        ++m.mapped;
    }
    return m;
}

std::optional<int> bin_of(int event_time) {
    if (event_time < -kMaxLead) return std::nullopt;
    return std::min(event_time, kMaxLag);
}

EventPanel build_design(std::size_t patches, std::size_t dates, std::span<const double> outcome,
                        std::span<const std::optional<std::size_t>> event_index) {
    if (outcome.size() != patches * dates) throw DimensionError("outcome size differs from patches x dates");
    if (event_index.size() != patches) throw DimensionError("event index size differs from patch count");
    EventPanel ep;
    ep.patch_count = patches;
    ep.date_count = dates;
    ep.obs.reserve(patches * dates);
    ep.design.assign(patches * dates * kBinCount, 0.0);
    for (std::size_t p = 0; p < patches; ++p)
        for (std::size_t t = 0; t < dates; ++t) {
            EventObservation o{p, t, outcome[p * dates + t], std::nullopt};
            if (event_index[p]) {
                const int et = static_cast<int>(t) - static_cast<int>(*event_index[p]);
                o.event_time = et;
                if (const auto b = bin_of(et)) ep.design[ep.obs.size() * kBinCount + bin_column(*b)] = 1.0;
            }
            ep.obs.push_back(o);
        }
    return ep;
}

EventPanel build_design(const smoother::ScorePanel& panel, const EventMapping& mapping) {
    std::vector<double> y(panel.patch_count() * panel.date_count());
    for (std::size_t p = 0; p < panel.patch_count(); ++p)
        for (std::size_t t = 0; t < panel.date_count(); ++t)
            y[p * panel.date_count() + t] = panel.has_stage2() ? *panel.stage2(p, t) : panel.stage1(p, t);
    return build_design(panel.patch_count(), panel.date_count(), y, mapping.event_index);
}

namespace {

// Demeans one column in place; returns the sweep count.
int demean_column(const EventPanel& ep, std::vector<double>& v, double tolerance, int max_sweeps,
                  const std::vector<double>& patch_n, const std::vector<double>& date_n) {
    std::vector<double> psum(ep.patch_count), dsum(ep.date_count);
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        double change = 0.0;
        std::fill(psum.begin(), psum.end(), 0.0);
        for (std::size_t i = 0; i < ep.obs.size(); ++i) psum[ep.obs[i].patch] += v[i];
        for (std::size_t i = 0; i < ep.obs.size(); ++i) {
            const double m = psum[ep.obs[i].patch] / patch_n[ep.obs[i].patch];
            v[i] -= m;
            change = std::max(change, std::abs(m));
        }
        std::fill(dsum.begin(), dsum.end(), 0.0);
        for (std::size_t i = 0; i < ep.obs.size(); ++i) dsum[ep.obs[i].time] += v[i];
        for (std::size_t i = 0; i < ep.obs.size(); ++i) {
            const double m = dsum[ep.obs[i].time] / date_n[ep.obs[i].time];
            v[i] -= m;
            change = std::max(change, std::abs(m));
        }
        if (change < tolerance) return sweep;
    }
    throw NumericError("within transform did not converge in " + std::to_string(max_sweeps) + " sweeps");
}

}  // namespace

Demeaned within_transform(const EventPanel& ep, double tolerance, int max_sweeps) {
    std::vector<double> patch_n(ep.patch_count, 0.0), date_n(ep.date_count, 0.0);
    for (const auto& o : ep.obs) {
        if (o.patch >= ep.patch_count || o.time >= ep.date_count)
            throw DimensionError("observation outside the panel");
        patch_n[o.patch] += 1;
        date_n[o.time] += 1;
    }
    const auto occupied = [](const std::vector<double>& n) {
        return std::count_if(n.begin(), n.end(), [](double c) { return c > 0; });
    };
    if (occupied(patch_n) < 2 || occupied(date_n) < 2)
        throw InputError("within transform needs at least 2 patches and 2 dates");

    Demeaned d;
    const std::size_t n = ep.obs.size();
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = ep.obs[i].outcome;
    d.sweeps = demean_column(ep, d.y, tolerance, max_sweeps, patch_n, date_n);
    d.x.resize(n * kBinCount);
    std::vector<double> col(n);
    for (int c = 0; c < kBinCount; ++c) {
        for (std::size_t i = 0; i < n; ++i) col[i] = ep.design[i * kBinCount + c];
        d.sweeps = std::max(d.sweeps, demean_column(ep, col, tolerance, max_sweeps, patch_n, date_n));
        for (std::size_t i = 0; i < n; ++i) d.x[i * kBinCount + c] = col[i];
    }
    return d;
}

RegressionResult estimate(const EventPanel& panel) {
    const Demeaned d = within_transform(panel);
    const std::size_t n = panel.obs.size();
    Eigen::MatrixXd X(n, kBinCount);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y(i) = d.y[i];
        for (int c = 0; c < kBinCount; ++c) X(i, c) = d.x[i * kBinCount + c];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-9);
    if (qr.rank() < kBinCount) {
        const int col = qr.colsPermutation().indices()(qr.rank());
        throw CollinearityError("event-time bin " + std::to_string(col - kMaxLead) +
                                " is collinear with the fixed effects or other bins");
    }
    const Eigen::VectorXd beta = qr.solve(y);
    RegressionResult r;
    for (int c = 0; c < kBinCount; ++c) r.coefficients[c] = beta(c);
    r.n_obs = n;
    r.converged = true;
    r.sweeps = d.sweeps;
    return r;
}

void write_coefficients_csv(const RegressionResult& result, const std::filesystem::path& path) {
    csv::Writer w(path, {"bin", "coefficient"});
    w.field(kReferenceBin).field(0.0);
    w.end_row();
    for (int b = -kMaxLead; b <= kMaxLag; ++b) {
        w.field(b).field(result.at(b));
        w.end_row();
    }
    w.close();
}

std::vector<EventRecord> read_events(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    t.require_header({"lon", "lat", "date", "event_type"});
    std::vector<EventRecord> out;
    for (const auto& r : t.rows())
        out.push_back({{csv::parse_double(r[0]), csv::parse_double(r[1])}, Date::parse(r[2]), r[3]});
    return out;
}

void write_events(std::span<const EventRecord> events, const std::filesystem::path& path) {
    csv::Writer w(path, {"lon", "lat", "date", "event_type"});
    for (const auto& e : events) {
        w.field(e.lonlat.lon).field(e.lonlat.lat).field(e.date.iso()).field(e.event_type);
        w.end_row();
    }
    w.close();
}

}  // namespace destrack::event_study
