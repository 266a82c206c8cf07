#include "repshift/dataio.hpp"

#include "repshift/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace repshift {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null" || s == "NULL";
}

// Missing tokens become NaN; anything else must parse fully as a double.
std::optional<double> parse_cell(const std::string& raw) {
    const std::string s = trim(raw);
    if (is_missing_token(s)) return kNaN;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
}

std::string fmt(double v) {
    if (std::isnan(v)) return "NaN";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

bool row_missing(const Subject& s, Eigen::Index j) {
    if (!s.x.col(j).allFinite()) return true;
    return s.has_responses() && std::isnan(s.y[j]);
}

Subject keep_columns(const Subject& s, const std::vector<Eigen::Index>& cols) {
    Subject out;
    out.id = s.id;
    out.x = s.x(Eigen::all, cols);
    if (s.has_responses()) out.y = s.y(cols);
    return out;
}

void check_not_all_missing(const Panel& p, const std::string& domain) {
    const Eigen::MatrixXd x = p.data.covariates();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (x.cols() > 0 && !x.row(r).array().isNaN().all()) continue;
        throw PreprocessError(domain + " column '" + p.covariate_names[static_cast<std::size_t>(r)] +
                              "' is entirely missing");
    }
    if (p.data.has_responses()) {
        const Eigen::VectorXd y = p.data.responses();
        if (y.size() == 0 || y.array().isNaN().all())
            throw PreprocessError(domain + " column '" + p.response_name + "' is entirely missing");
    }
}

struct Cleaned {
    Panel panel;
    std::size_t dropped_rows = 0;
    std::size_t dropped_subjects = 0;
};

Cleaned clean(const Panel& in, const PreprocessSpec& spec, bool drop_subjects, const std::string& domain) {
    Cleaned c{Panel{in.covariate_names, in.response_name, RepeatedDataset(in.data.dim())}, 0, 0};
    for (const auto& s : in.data.subjects()) {
        std::vector<Eigen::Index> keep(static_cast<std::size_t>(s.num_observations()));
        std::iota(keep.begin(), keep.end(), Eigen::Index{0});
        if (spec.hours_retained && keep.size() > *spec.hours_retained) {
            c.dropped_rows += keep.size() - *spec.hours_retained;
            keep.resize(*spec.hours_retained);
        }
        if (drop_subjects &&
            std::any_of(keep.begin(), keep.end(), [&](Eigen::Index j) { return row_missing(s, j); })) {
            ++c.dropped_subjects;
            c.dropped_rows += keep.size();
            continue;
        }
        c.panel.data.add(keep_columns(s, keep));
    }
    check_not_all_missing(c.panel, domain);

    Panel rows{in.covariate_names, in.response_name, RepeatedDataset(in.data.dim())};
    for (const auto& s : c.panel.data.subjects()) {
        std::vector<Eigen::Index> keep;
        for (Eigen::Index j = 0; j < s.num_observations(); ++j)
            if (!spec.drop_missing_rows || !row_missing(s, j)) keep.push_back(j);
        c.dropped_rows += static_cast<std::size_t>(s.num_observations()) - keep.size();
        if (keep.empty()) {
            ++c.dropped_subjects;
            continue;
        }
        rows.data.add(keep_columns(s, keep));
    }
    if (rows.data.empty()) throw PreprocessError(domain + " data is empty after dropping missing values");
    c.panel = std::move(rows);
    return c;
}

void apply_transforms(Panel& p, const PreprocessSpec& spec, const std::vector<Eigen::Index>& log1p_rows,
                      const std::string& domain) {
    std::vector<Subject> subjects = p.data.subjects();
    for (auto& s : subjects) {
        for (Eigen::Index r : log1p_rows) {
            for (Eigen::Index j = 0; j < s.x.cols(); ++j) {
                const double v = s.x(r, j);
                if (v <= -1.0) throw PreprocessError(domain + " column '" + p.covariate_names[r] + "' has values <= -1");
                s.x(r, j) = std::log1p(v);
            }
        }
        if (spec.response_transform == ResponseTransform::log && s.has_responses()) {
            if ((s.y.array() <= 0.0).any())
                throw PreprocessError(domain + " response '" + p.response_name + "' has nonpositive values");
            s.y = s.y.array().log();
        }
    }
    p.data = RepeatedDataset(p.data.dim(), std::move(subjects));
}

MinMaxScaler fit_scaler(const std::vector<std::string>& names, const std::vector<const RepeatedDataset*>& sets) {
    MinMaxScaler sc;
    sc.names = names;
    const auto d = static_cast<Eigen::Index>(names.size());
    sc.min = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    sc.max = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
    for (const auto* set : sets) {
        const Eigen::MatrixXd x = set->covariates();
        if (x.cols() == 0) continue;
        sc.min = sc.min.cwiseMin(x.rowwise().minCoeff());
        sc.max = sc.max.cwiseMax(x.rowwise().maxCoeff());
    }
    return sc;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

namespace {

std::vector<std::string> parse_header(const std::string& line) {
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    return header;
}

// Reads data rows after a header that sits on line `line_no`.
Panel parse_panel(std::istream& is, const std::vector<std::string>& header, std::size_t line_no,
                  const PanelSchema& schema) {
    std::string line;

    const std::size_t sid = column_index(header, schema.subject_column);
    std::vector<std::size_t> xcols;
    for (const auto& c : schema.covariates) {
        if (c == schema.response) throw SchemaError("response column '" + c + "' is also listed as a covariate");
        xcols.push_back(column_index(header, c));
    }
    if (xcols.empty()) throw SchemaError("schema lists no covariates");
    const bool has_y = !schema.response.empty();
    const std::size_t ycol = has_y ? column_index(header, schema.response) : 0;

    const int d = static_cast<int>(xcols.size());
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::vector<double>>> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(fields.size()));
        const std::string id = trim(fields[sid]);
        if (id.empty()) throw ParseError(line_no, "empty subject identifier");
        std::vector<double> vals;
        vals.reserve(xcols.size() + 1);
        auto take = [&](std::size_t col) {
            const auto v = parse_cell(fields[col]);
            if (!v) throw ParseError(line_no, "column '" + header[col] + "': cannot parse '" + fields[col] + "'");
            vals.push_back(*v);
        };
        for (auto c : xcols) take(c);
        if (has_y) take(ycol);
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(std::move(vals));
    }
    if (order.empty()) throw EmptyInputError("panel file has no data rows");

    Panel p{schema.covariates, schema.response, RepeatedDataset(d)};
    for (const auto& id : order) {
        const auto& r = rows.at(id);
        Subject s;
        s.id = id;
        s.x.resize(d, static_cast<Eigen::Index>(r.size()));
        if (has_y) s.y.resize(static_cast<Eigen::Index>(r.size()));
        for (std::size_t j = 0; j < r.size(); ++j) {
            for (int l = 0; l < d; ++l) s.x(l, static_cast<Eigen::Index>(j)) = r[j][static_cast<std::size_t>(l)];
            if (has_y) s.y[static_cast<Eigen::Index>(j)] = r[j].back();
        }
        p.data.add(std::move(s));
    }
    return p;
}

}  // namespace

Panel read_panel_csv(std::istream& is, const PanelSchema& schema) {
    std::string line;
    if (!std::getline(is, line)) throw EmptyInputError("panel file is empty");
    return parse_panel(is, parse_header(line), 1, schema);
}

Panel load_panel_csv(const std::string& path, const PanelSchema& schema) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_panel_csv(is, schema);
}

void write_dataset_csv(std::ostream& os, const RepeatedDataset& data, const std::string& manifest) {
    if (!manifest.empty()) os << "# " << manifest << '\n';
    const bool has_y = data.has_responses();
    os << "subject_id,obs_id";
    for (int l = 1; l <= data.dim(); ++l) os << ",x_" << l;
    if (has_y) os << ",y";
    os << '\n';
    for (const auto& s : data.subjects()) {
        for (Eigen::Index j = 0; j < s.num_observations(); ++j) {
            os << s.id << ',' << j;
            for (Eigen::Index l = 0; l < s.x.rows(); ++l) os << ',' << fmt(s.x(l, j));
            if (has_y) os << ',' << fmt(s.y[j]);
            os << '\n';
        }
    }
}

void write_dataset_csv(const std::string& path, const RepeatedDataset& data, const std::string& manifest) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_dataset_csv(os, data, manifest);
}

DatasetFile read_dataset_csv(std::istream& is) {
    DatasetFile out;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.rfind('#', 0) != 0) {
            have_header = true;
            break;
        }
        if (out.manifest.empty()) out.manifest = trim(line.substr(1));
    }
    if (!have_header) throw EmptyInputError("dataset file has no header");
    const std::vector<std::string> header = parse_header(line);
    PanelSchema schema;
    schema.subject_column = "subject_id";
    for (const auto& h : header) {
        if (h.rfind("x_", 0) == 0) schema.covariates.push_back(h);
        if (h == "y") schema.response = "y";
    }
    if (std::find(header.begin(), header.end(), "obs_id") == header.end())
        throw SchemaError("dataset file lacks an obs_id column");
    out.data = parse_panel(is, header, line_no, schema).data;
    return out;
}

DatasetFile read_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_dataset_csv(is);
}

double MinMaxScaler::apply(Eigen::Index col, double v) const {
    const double span = max[col] - min[col];
    if (!(span > 0.0)) return 0.0;
    return (v - min[col]) / span;
}

RepeatedDataset MinMaxScaler::transform(const RepeatedDataset& data, std::size_t* clamped) const {
    if (data.dim() != static_cast<int>(min.size())) throw ShapeError("scaler dimension does not match data");
    std::size_t count = 0;
    RepeatedDataset out(data.dim());
    for (auto s : data.subjects()) {
        for (Eigen::Index j = 0; j < s.x.cols(); ++j) {
            for (Eigen::Index l = 0; l < s.x.rows(); ++l) {
                const double v = apply(l, s.x(l, j));
                const double c = std::clamp(v, 0.0, 1.0);
                if (c != v) ++count;
                s.x(l, j) = c;
            }
        }
        out.add(std::move(s));
    }
    if (clamped) *clamped = count;
    return out;
}

void MinMaxScaler::save(std::ostream& os) const {
    os << "# column min max\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        os << names[i] << ' ' << fmt(min[static_cast<Eigen::Index>(i)]) << ' '
           << fmt(max[static_cast<Eigen::Index>(i)]) << '\n';
}

void MinMaxScaler::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    save(os);
}

MinMaxScaler MinMaxScaler::load(std::istream& is) {
    MinMaxScaler sc;
    std::vector<double> lo, hi;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string name, a, b;
        if (!(ls >> name >> a >> b)) throw ParseError(line_no, "expected '<column> <min> <max>'");
        const auto va = parse_cell(a);
        const auto vb = parse_cell(b);
        if (!va || !vb) throw ParseError(line_no, "malformed scaler bounds");
        sc.names.push_back(name);
        lo.push_back(*va);
        hi.push_back(*vb);
    }
    sc.min = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    sc.max = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    return sc;
}

MinMaxScaler MinMaxScaler::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return load(is);
}

PreprocessResult preprocess(const Panel& source, const Panel& target, const PreprocessSpec& spec) {
    if (source.covariate_names != target.covariate_names)
        throw SchemaError("source and target covariate columns differ");
    if (!spec.response_col.empty()) {
        if (std::find(source.covariate_names.begin(), source.covariate_names.end(), spec.response_col) !=
            source.covariate_names.end())
            throw SchemaError("response column '" + spec.response_col + "' is also a covariate");
        if (source.response_name != spec.response_col)
            throw SchemaError("source response column is '" + source.response_name + "', spec names '" +
                              spec.response_col + "'");
    }
    std::vector<Eigen::Index> log1p_rows;
    for (const auto& c : spec.log1p_cols) {
        const auto it = std::find(source.covariate_names.begin(), source.covariate_names.end(), c);
        if (it == source.covariate_names.end()) throw SchemaError("log1p column '" + c + "' is not a covariate");
        log1p_rows.push_back(static_cast<Eigen::Index>(it - source.covariate_names.begin()));
    }

    Cleaned src = clean(source, spec, false, "source");
    Cleaned tgt = clean(target, spec, spec.drop_missing_subjects_in_target, "target");
    apply_transforms(src.panel, spec, log1p_rows, "source");
    apply_transforms(tgt.panel, spec, log1p_rows, "target");

    PreprocessResult res;
    res.dropped_rows = src.dropped_rows + tgt.dropped_rows;
    res.dropped_subjects = src.dropped_subjects + tgt.dropped_subjects;
    if (spec.rescale == Rescale::minmax_to_unit_cube) {
        std::vector<const RepeatedDataset*> sets{&src.panel.data};
        if (spec.scaling_range == ScalingRange::joint) sets.push_back(&tgt.panel.data);
        MinMaxScaler sc = fit_scaler(source.covariate_names, sets);
        src.panel.data = sc.transform(src.panel.data);
        tgt.panel.data = sc.transform(tgt.panel.data, &res.target_clamped);
        const auto total = static_cast<double>(tgt.panel.data.num_observations()) * tgt.panel.data.dim();
        res.target_clamped_fraction = total > 0 ? static_cast<double>(res.target_clamped) / total : 0.0;
        res.scaler = std::move(sc);
    }
    res.source = std::move(src.panel);
    res.target = std::move(tgt.panel);
    return res;
}

Panel preprocess(const Panel& data, const PreprocessSpec& spec, std::optional<MinMaxScaler>* scaler) {
    PreprocessSpec single = spec;
    single.scaling_range = ScalingRange::source;
    auto res = preprocess(data, data, single);
    if (scaler) *scaler = res.scaler;
    return std::move(res.source);
}

std::vector<BinStat> binned_mse(const Eigen::VectorXd& true_y, const Eigen::VectorXd& pred_y, std::size_t bins) {
    if (true_y.size() != pred_y.size()) throw ShapeError("true and predicted vectors differ in length");
    if (true_y.size() == 0) throw EmptyInputError("binned_mse needs samples");
    if (bins == 0 || bins > static_cast<std::size_t>(true_y.size()))
        throw DomainError("bins must lie in [1, number of samples]");
    const auto n = static_cast<std::size_t>(true_y.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return true_y[static_cast<Eigen::Index>(a)] < true_y[static_cast<Eigen::Index>(b)];
    });
    std::vector<BinStat> out(bins);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t len = n / bins + (b < n % bins ? 1 : 0);
        double st = 0.0, se = 0.0;
        for (std::size_t k = pos; k < pos + len; ++k) {
            const auto i = static_cast<Eigen::Index>(idx[k]);
            st += true_y[i];
            const double r = pred_y[i] - true_y[i];
            se += r * r;
        }
        out[b] = BinStat{st / static_cast<double>(len), se / static_cast<double>(len), len};
        pos += len;
    }
    return out;
}

void write_binned_csv(std::ostream& os, const std::vector<BinStat>& bins) {
    os << "bin,mean_true,mse,count\n";
    for (std::size_t b = 0; b < bins.size(); ++b)
        os << b + 1 << ',' << fmt(bins[b].mean_true) << ',' << fmt(bins[b].mse) << ',' << bins[b].count << '\n';
}

}  // namespace repshift
