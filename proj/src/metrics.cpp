// SPDX-License-Identifier: Apache-2.0
//
// tagloc: range-angle estimation and tag localization for multi-static
// backscatter networks
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tagloc/harness.hpp"

namespace tagloc
{

CdfTable compute_cdf(const std::string &method, const std::vector<double> &errors)
{
    if (errors.empty())
        throw std::invalid_argument("compute_cdf: empty input");
    CdfTable t;
    t.method = method;
    t.n_total = static_cast<int>(errors.size());
    for (double e : errors)
    {
        if (std::isnan(e))
            ++t.n_failed;
        else
            t.values.push_back(e);
    }
    if (t.values.empty())
        throw std::invalid_argument("compute_cdf: needs at least one finite error");
    std::sort(t.values.begin(), t.values.end());
    t.ordinates.resize(t.values.size());
    const double n = static_cast<double>(t.values.size());
    for (std::size_t i = 0; i < t.values.size(); ++i)
        t.ordinates[i] = static_cast<double>(i + 1) / n;
    t.failure_rate = static_cast<double>(t.n_failed) / t.n_total;
    return t;
}

namespace
{

std::string fmt_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string &s)
{
    if (s == "nan" || s.empty())
        return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

} // namespace

std::string records_to_csv(const std::vector<TrialRecord> &records)
{
    std::ostringstream out;
    out << "trial,tag,method,range_err_m,angle_err_rad,pos_err_m,time_ns,failed\n";
    for (const TrialRecord &r : records)
        out << r.trial << ',' << r.tag << ',' << r.method << ',' << fmt_double(r.range_err_m)
            << ',' << fmt_double(r.angle_err_rad) << ',' << fmt_double(r.pos_err_m) << ','
            << r.time_ns << ',' << (r.failed ? 1 : 0) << '\n';
    return out.str();
}

std::vector<TrialRecord> records_from_csv(const std::string &csv_text)
{
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("records_from_csv: empty input");
    if (line != "trial,tag,method,range_err_m,angle_err_rad,pos_err_m,time_ns,failed")
        throw std::runtime_error("records_from_csv: unexpected header");
    std::vector<TrialRecord> records;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::array<std::string, 8> f;
        std::size_t start = 0;
        for (int i = 0; i < 8; ++i)
        {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos && i < 7)
                throw std::runtime_error("records_from_csv: malformed row");
            f[static_cast<std::size_t>(i)] =
                line.substr(start, (comma == std::string::npos) ? std::string::npos : comma - start);
            start = comma + 1;
        }
        TrialRecord r;
        r.trial = std::stoi(f[0]);
        r.tag = std::stoi(f[1]);
        r.method = f[2];
        r.range_err_m = parse_double(f[3]);
        r.angle_err_rad = parse_double(f[4]);
        r.pos_err_m = parse_double(f[5]);
        r.time_ns = std::stoll(f[6]);
        r.failed = (f[7] == "1");
        records.push_back(std::move(r));
    }
    return records;
}

void emit_results(const std::vector<TrialRecord> &records, const std::vector<CdfTable> &cdfs,
                  const std::vector<BenchResult> &benches, const std::string &out_dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream out(fs::path(out_dir) / "records.csv");
        if (!out)
            throw std::runtime_error("emit_results: cannot write records.csv");
        out << records_to_csv(records);
    }

    if (!cdfs.empty())
    {
        std::ofstream out(fs::path(out_dir) / "cdf.csv");
        if (!out)
            throw std::runtime_error("emit_results: cannot write cdf.csv");
        out << "method,error,cdf\n";
        for (const CdfTable &t : cdfs)
            for (std::size_t i = 0; i < t.values.size(); ++i)
                out << t.method << ',' << fmt_double(t.values[i]) << ','
                    << fmt_double(t.ordinates[i]) << '\n';
    }

    // summary: per method, medians over the non-failed rows
    using nlohmann::json;
    struct Agg
    {
        std::vector<double> range, angle, pos, time_ns;
        int n = 0, failed = 0;
    };
    std::map<std::string, Agg> agg;
    for (const TrialRecord &r : records)
    {
        Agg &a = agg[r.method];
        ++a.n;
        if (r.failed)
            ++a.failed;
        if (!std::isnan(r.range_err_m))
            a.range.push_back(r.range_err_m);
        if (!std::isnan(r.angle_err_rad))
            a.angle.push_back(r.angle_err_rad);
        if (!std::isnan(r.pos_err_m))
            a.pos.push_back(r.pos_err_m);
        a.time_ns.push_back(static_cast<double>(r.time_ns));
    }
    json summary;
    summary["n_records"] = records.size();
    json methods = json::object();
    for (auto &[name, a] : agg)
    {
        json m;
        m["n"] = a.n;
        m["n_failed"] = a.failed;
        m["failure_rate"] = a.n > 0 ? static_cast<double>(a.failed) / a.n : 0.0;
        m["median_range_err_m"] = a.range.empty() ? json() : json(median(a.range));
        m["median_angle_err_rad"] = a.angle.empty() ? json() : json(median(a.angle));
        m["median_pos_err_m"] = a.pos.empty() ? json() : json(median(a.pos));
        m["median_time_ns"] = a.time_ns.empty() ? json() : json(median(a.time_ns));
        m["mean_time_ns"] = a.time_ns.empty() ? json() : json(mean(a.time_ns));
        methods[name] = m;
    }
    summary["methods"] = methods;
    {
        std::ofstream out(fs::path(out_dir) / "summary.json");
        if (!out)
            throw std::runtime_error("emit_results: cannot write summary.json");
        out << summary.dump(2) << "\n";
    }

    if (!benches.empty())
    {
        json jb = json::array();
        for (const BenchResult &b : benches)
            jb.push_back({{"method", b.method},
                          {"median_ns", b.median_ns},
                          {"mean_ns", b.mean_ns},
                          {"calls", b.calls}});
        std::ofstream out(fs::path(out_dir) / "bench.json");
        if (!out)
            throw std::runtime_error("emit_results: cannot write bench.json");
        out << jb.dump(2) << "\n";
    }
}

} // namespace tagloc
