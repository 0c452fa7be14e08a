#pragma once

#include "ncfem/afem.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ncfem {

/// Bad command line or configuration; maps to exit code 2.
class UsageError : public Error
{
public:
    using Error::Error;
};

enum class Command { Solve, Afem, Study, Infsup, Verify };

inline std::optional<Command> parse_command(std::string_view s)
{
    if (s == "solve") return Command::Solve;
    if (s == "afem") return Command::Afem;
    if (s == "study") return Command::Study;
    if (s == "infsup") return Command::Infsup;
    if (s == "verify") return Command::Verify;
    return std::nullopt;
}

struct RunConfig
{
    Command command = Command::Study;
    std::string problem = "ns_manufactured";
    std::string domain; // empty: the registry default
    int levels = 5;
    int initial_refinements = 2; // uniform refinements of the domain before the first level
    double theta = 0.5;
    double tol = 1e-10;
    Index max_free_dofs = 10000;
    std::string output_dir = ".";
    std::uint64_t seed = 1;
    bool perturb_jacobian = false;

    void validate() const
    {
        if (levels < 1) throw UsageError("levels must be at least 1");
        if (initial_refinements < 0) throw UsageError("initial_refinements must be nonnegative");
        if (!(theta > 0.0 && theta <= 1.0)) throw UsageError("theta must lie in (0, 1]");
        if (!(tol > 0.0)) throw UsageError("tol must be positive");
        if (max_free_dofs < 1) throw UsageError("max_free_dofs must be positive");
    }
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    std::from_chars_result r{};
    if constexpr (std::is_floating_point_v<T>) {
        // from_chars for double is not universally available; strtod accepts the same syntax
        char* end = nullptr;
        out = std::strtod(first, &end);
        r.ptr = end;
        r.ec = end == first ? std::errc::invalid_argument : std::errc{};
    } else {
        r = std::from_chars(first, last, out);
    }
    if (r.ec != std::errc{} || r.ptr != last) throw UsageError("invalid value '" + value + "' for " + key);
    return out;
}

} // namespace detail

/// Apply one key=value setting.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value)
{
    using detail::parse_number;
    if (key == "command") {
        auto c = parse_command(value);
        if (!c) throw UsageError("unknown command '" + value + "'");
        cfg.command = *c;
    } else if (key == "problem") cfg.problem = value;
    else if (key == "domain") cfg.domain = value;
    else if (key == "levels") cfg.levels = parse_number<int>(key, value);
    else if (key == "initial_refinements") cfg.initial_refinements = parse_number<int>(key, value);
    else if (key == "theta") cfg.theta = parse_number<double>(key, value);
    else if (key == "tol") cfg.tol = parse_number<double>(key, value);
    else if (key == "max_free_dofs") cfg.max_free_dofs = parse_number<Index>(key, value);
    else if (key == "output_dir" || key == "out") cfg.output_dir = value;
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else throw UsageError("unknown configuration key '" + key + "'");
}

/// key = value lines; '#' starts a comment; blank lines are ignored.
inline void read_config(std::istream& in, RunConfig& cfg)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key=value");
        apply_setting(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
}

inline void read_config_file(const std::string& path, RunConfig& cfg)
{
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    read_config(in, cfg);
}

/// Built-in domain name or mesh file path.
inline Triangulation load_domain(const std::string& name)
{
    if (auto d = parse_builtin_domain(name)) return builtin_domain(*d);
    if (!std::filesystem::exists(name)) throw UsageError("unknown domain '" + name + "' (use unit_square, l_shape or a mesh file)");
    return read_mesh_file(name);
}

// CSV ---------------------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "level,n_free,h_max,error_pw,eta_total,newton_iters,rate_error,rate_eta";

namespace detail {

inline std::string csv_number(double v)
{
    if (std::isnan(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double csv_parse(const std::string& s)
{
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return parse_number<double>("csv field", s);
}

} // namespace detail

inline void write_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records)
{
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.level << ',' << r.n_free << ',' << detail::csv_number(r.h_max) << ',' << detail::csv_number(r.error_pw) << ','
            << detail::csv_number(r.eta_total) << ',' << r.newton_iters << ',' << detail::csv_number(r.rate_error) << ','
            << detail::csv_number(r.rate_eta) << '\n';
    }
}

inline std::vector<ConvergenceRecord> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kCsvHeader) throw Error("CSV header mismatch");
    std::vector<ConvergenceRecord> out;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(detail::trim(cell));
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 8) throw Error("CSV row has " + std::to_string(f.size()) + " fields");
        ConvergenceRecord r;
        r.level = detail::parse_number<int>("level", f[0]);
        r.n_free = detail::parse_number<Index>("n_free", f[1]);
        r.h_max = detail::csv_parse(f[2]);
        r.error_pw = detail::csv_parse(f[3]);
        r.eta_total = detail::csv_parse(f[4]);
        r.newton_iters = detail::parse_number<int>("newton_iters", f[5]);
        r.rate_error = detail::csv_parse(f[6]);
        r.rate_eta = detail::csv_parse(f[7]);
        out.push_back(r);
    }
    return out;
}

// SVG ---------------------------------------------------------------------------------

/**
 * Log-log plot of error_pw and eta_total against n_free with a slope -1/2 reference line.
 * Returns the written path, or nothing (with a warning on stderr) for an empty record set.
 */
inline std::optional<std::filesystem::path> emit_plots(const std::vector<ConvergenceRecord>& records,
                                                       const std::filesystem::path& output_dir,
                                                       const std::string& name = "convergence.svg")
{
    if (records.empty()) {
        std::cerr << "warning: no records, no plot written\n";
        return std::nullopt;
    }
    const double W = 640, H = 480, L = 70, R = 20, T = 30, B = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto include = [&](double x, double y) {
        if (!(x > 0) || !(y > 0)) return;
        xmin = std::min(xmin, std::log10(x));
        xmax = std::max(xmax, std::log10(x));
        ymin = std::min(ymin, std::log10(y));
        ymax = std::max(ymax, std::log10(y));
    };
    for (const auto& r : records) {
        include(r.n_free, r.error_pw);
        include(r.n_free, r.eta_total);
    }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    xmin = std::floor(xmin);
    xmax = std::max(std::ceil(xmax), xmin + 1);
    ymin = std::floor(ymin);
    ymax = std::max(std::ceil(ymax), ymin + 1);
    auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<g stroke=\"#ccc\" stroke-width=\"1\">\n";
    for (double d = xmin; d <= xmax + 1e-9; d += 1)
        s << "<line x1=\"" << fmt(px(d)) << "\" y1=\"" << fmt(py(ymin)) << "\" x2=\"" << fmt(px(d)) << "\" y2=\"" << fmt(py(ymax)) << "\"/>\n";
    for (double d = ymin; d <= ymax + 1e-9; d += 1)
        s << "<line x1=\"" << fmt(px(xmin)) << "\" y1=\"" << fmt(py(d)) << "\" x2=\"" << fmt(px(xmax)) << "\" y2=\"" << fmt(py(d)) << "\"/>\n";
    s << "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (double d = xmin; d <= xmax + 1e-9; d += 1)
        s << "<text x=\"" << fmt(px(d)) << "\" y=\"" << fmt(H - B + 18) << "\" text-anchor=\"middle\">1e" << static_cast<int>(d) << "</text>\n";
    for (double d = ymin; d <= ymax + 1e-9; d += 1)
        s << "<text x=\"" << fmt(L - 8) << "\" y=\"" << fmt(py(d) + 4) << "\" text-anchor=\"end\">1e" << static_cast<int>(d) << "</text>\n";
    s << "<text x=\"" << fmt((L + W - R) / 2) << "\" y=\"" << fmt(H - 15) << "\" text-anchor=\"middle\">n_free</text>\n</g>\n";

    auto polyline = [&](auto value, const char* color, const char* label, double ly) {
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& r : records) {
            const double y = value(r);
            if (!(y > 0) || r.n_free <= 0) continue;
            s << (first ? "" : " ") << fmt(px(std::log10(static_cast<double>(r.n_free)))) << ',' << fmt(py(std::log10(y)));
            first = false;
        }
        s << "\"/>\n<text x=\"" << fmt(W - R - 150) << "\" y=\"" << fmt(ly) << "\" fill=\"" << color
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
    };
    polyline([](const ConvergenceRecord& r) { return r.error_pw; }, "#1f77b4", "error_pw", T + 15);
    polyline([](const ConvergenceRecord& r) { return r.eta_total; }, "#d62728", "eta_total", T + 30);

    // slope -1/2 through the first eta point
    const auto& r0 = records.front();
    if (r0.eta_total > 0 && r0.n_free > 0) {
        const double x0 = std::log10(static_cast<double>(r0.n_free)), y0 = std::log10(r0.eta_total);
        const double x1 = xmax, y1 = y0 - 0.5 * (x1 - x0);
        s << "<line x1=\"" << fmt(px(x0)) << "\" y1=\"" << fmt(py(y0)) << "\" x2=\"" << fmt(px(x1)) << "\" y2=\""
          << fmt(py(y1)) << "\" stroke=\"#555\" stroke-dasharray=\"6,4\"/>\n"
          << "<text x=\"" << fmt(W - R - 150) << "\" y=\"" << fmt(T + 45)
          << "\" fill=\"#555\" font-family=\"sans-serif\" font-size=\"12\">slope -1/2</text>\n";
    }
    s << "</svg>\n";

    std::filesystem::create_directories(output_dir);
    const auto path = output_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << s.str();
    return path;
}

} // namespace ncfem
