#include "ktransfer/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ktransfer/errors.hpp"
#include "ktransfer/ingest.hpp"

namespace ktransfer {

namespace {

std::string num(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pct(double v) { return num(100.0 * v, 2); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::size_t column(const Table& t, const std::string& name) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw ConfigError("result table lacks column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ConfigError("non-numeric value '" + s + "' in result table");
  }
}

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_number(double v, int decimals) { return num(v, decimals); }

void write_csv(std::ostream& out, const Table& table) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i]);
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

void write_text(std::ostream& out, const Table& table) {
  std::vector<std::size_t> width(table.header.size(), 0);
  auto measure = [&](const std::vector<std::string>& cells) {
    if (cells.size() > width.size()) width.resize(cells.size(), 0);
    for (std::size_t i = 0; i < cells.size(); ++i) width[i] = std::max(width[i], cells[i].size());
  };
  measure(table.header);
  for (const auto& r : table.rows) measure(r);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string pad(width[i] - cells[i].size(), ' ');
      // first column left-aligned, the rest right-aligned
      if (i == 0) out << cells[i] << pad;
      else out << "  " << pad << cells[i];
    }
    out << '\n';
  };
  if (!table.title.empty()) out << table.title << '\n';
  line(table.header);
  std::size_t total = 0;
  for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
  out << std::string(total, '-') << '\n';
  for (const auto& r : table.rows) line(r);
  for (const auto& n : table.notes) out << n << '\n';
}

Table read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw ParseError(t.rows.size() + 2, "", "wrong number of fields");
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw IoError(path.string() + " is empty");
  return t;
}

Table reference_long(const std::vector<MetricReport>& reports) {
  Table t{"", {"model", "course", "n", "acc", "auc", "acc_var", "auc_var"}, {}, {}};
  for (const auto& r : reports)
    t.rows.push_back({r.model, r.course, std::to_string(r.n_predictions), num(r.acc, 6), num(r.auc, 6),
                      num(r.acc_variance, 8), num(r.auc_variance, 8)});
  return t;
}

Table naive_long(const NaiveTransferResult& result) {
  Table t{"", {"model", "target", "n", "acc", "auc"}, {}, {}};
  for (const auto& row : result.cells)
    for (const auto& r : row)
      t.rows.push_back({r.model, r.course, std::to_string(r.n_predictions), num(r.acc, 6), num(r.auc, 6)});
  return t;
}

Table pairwise_long(const PairwiseResult& result) {
  Table t{"", {"model", "source", "target", "n", "acc", "auc"}, {}, {}};
  for (std::size_t s = 0; s < result.cells.size(); ++s)
    for (const auto& r : result.cells[s])
      t.rows.push_back({result.model, result.courses[s], r.course, std::to_string(r.n_predictions), num(r.acc, 6),
                        num(r.auc, 6)});
  return t;
}

Table curve_long(const std::vector<CurvePoint>& points) {
  Table t{"", {"model", "course", "pilot_size", "seed", "fold", "acc", "auc"}, {}, {}};
  for (const auto& p : points)
    t.rows.push_back({p.model, p.course, std::to_string(p.pilot_size), std::to_string(p.seed), std::to_string(p.fold),
                      num(p.acc, 6), num(p.auc, 6)});
  return t;
}

std::vector<CurvePoint> curve_from_long(const Table& t) {
  const auto m = column(t, "model"), c = column(t, "course"), n = column(t, "pilot_size"), s = column(t, "seed"),
             f = column(t, "fold"), a = column(t, "acc"), u = column(t, "auc");
  std::vector<CurvePoint> out;
  for (const auto& r : t.rows)
    out.push_back({r[m], r[c], static_cast<std::size_t>(to_double(r[n])), static_cast<std::uint64_t>(std::stoull(r[s])),
                   static_cast<int>(to_double(r[f])), to_double(r[a]), to_double(r[u])});
  return out;
}

Table reference_grid(const Table& lt) {
  const auto m = column(lt, "model"), c = column(lt, "course"), a = column(lt, "acc"), u = column(lt, "auc");
  std::vector<std::string> models, courses;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> cell;
  for (const auto& r : lt.rows) {
    push_unique(models, r[m]);
    push_unique(courses, r[c]);
    cell[{r[m], r[c]}] = {to_double(r[a]), to_double(r[u])};
  }
  Table t;
  t.title = "Within-course reference (k-fold CV), ACC / AUC in %";
  t.header = {"model"};
  for (const auto& cs : courses) {
    t.header.push_back(cs + " ACC");
    t.header.push_back(cs + " AUC");
  }
  for (const auto& md : models) {
    std::vector<std::string> row = {md};
    for (const auto& cs : courses) {
      auto it = cell.find({md, cs});
      row.push_back(it == cell.end() ? "-" : pct(it->second.first));
      row.push_back(it == cell.end() ? "-" : pct(it->second.second));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table naive_grid(const Table& lt) {
  const auto m = column(lt, "model"), c = column(lt, "target"), a = column(lt, "acc"), u = column(lt, "auc");
  std::vector<std::string> models, targets;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> cell;
  for (const auto& r : lt.rows) {
    push_unique(models, r[m]);
    push_unique(targets, r[c]);
    cell[{r[m], r[c]}] = {to_double(r[a]), to_double(r[u])};
  }
  Table t;
  t.title = "Naive transfer to each target course, ACC / AUC in %";
  t.header = {"model"};
  for (const auto& tg : targets) {
    t.header.push_back(tg + " ACC");
    t.header.push_back(tg + " AUC");
  }
  t.header.push_back("Avg ACC");
  t.header.push_back("Avg AUC");
  for (const auto& md : models) {
    std::vector<std::string> row = {md};
    double sa = 0, su = 0;
    std::size_t n = 0;
    for (const auto& tg : targets) {
      auto it = cell.find({md, tg});
      if (it == cell.end()) {
        row.insert(row.end(), {"-", "-"});
        continue;
      }
      row.push_back(pct(it->second.first));
      row.push_back(pct(it->second.second));
      sa += it->second.first;
      su += it->second.second;
      ++n;
    }
    row.push_back(n ? pct(sa / static_cast<double>(n)) : "-");
    row.push_back(n ? pct(su / static_cast<double>(n)) : "-");
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table pairwise_grid(const Table& lt, const std::string& metric) {
  const auto m = column(lt, "model"), s = column(lt, "source"), tg = column(lt, "target"), v = column(lt, metric);
  std::vector<std::string> courses;
  std::string model;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& r : lt.rows) {
    model = r[m];
    push_unique(courses, r[s]);
    push_unique(courses, r[tg]);
    cell[{r[s], r[tg]}] = to_double(r[v]);
  }
  Table t;
  std::string upper = metric;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  t.title = model + " pairwise transfer " + upper + " in % (rows: train course, columns: test course)";
  t.header = {"train \\ test"};
  for (const auto& c : courses) t.header.push_back(c);
  for (const auto& src : courses) {
    std::vector<std::string> row = {src};
    for (const auto& dst : courses) {
      auto it = cell.find({src, dst});
      std::string val = it == cell.end() ? "-" : pct(it->second);
      if (src == dst && it != cell.end()) val = "*" + val;
      row.push_back(val);
    }
    t.rows.push_back(std::move(row));
  }
  t.notes.push_back("* diagonal: within-course k-fold CV (set in bold in the usual table layout)");
  return t;
}

Table curve_grid(const std::vector<CurveSummary>& summary, const std::string& course, const std::string& metric) {
  std::vector<std::string> models;
  std::vector<std::size_t> sizes;
  std::map<std::pair<std::string, std::size_t>, double> cell;
  for (const auto& s : summary) {
    if (s.course != course) continue;
    push_unique(models, s.model);
    push_unique(sizes, s.pilot_size);
    cell[{s.model, s.pilot_size}] = metric == "acc" ? s.acc : s.auc;
  }
  std::sort(sizes.begin(), sizes.end());
  Table t;
  t.title = course + " learning curve, " + (metric == "acc" ? std::string("ACC") : std::string("AUC")) +
            " in % by number of pilot students";
  t.header = {"model"};
  for (auto n : sizes) t.header.push_back(std::to_string(n));
  for (const auto& md : models) {
    std::vector<std::string> row = {md};
    for (auto n : sizes) {
      auto it = cell.find({md, n});
      row.push_back(it == cell.end() ? "-" : pct(it->second));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<std::string>& x_ticks, const std::vector<Series>& series) {
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double W = 720, H = 440, left = 70, right = 170, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (ymin > ymax) ymin = 0, ymax = 1;
  if (ymax - ymin < 1e-9) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double xmax = std::max<double>(1.0, static_cast<double>(x_ticks.size()) - 1.0);
  auto px = [&](double x) { return left + pw * x / xmax; };
  auto py = [&](double y) { return top + ph * (1.0 - (y - ymin) / (ymax - ymin)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5.0;
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(y) << "\" y2=\"" << py(y)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << num(y, 2) << "</text>\n";
  }
  for (std::size_t i = 0; i < x_ticks.size(); ++i)
    o << "<text x=\"" << px(static_cast<double>(i)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << xml_escape(x_ticks[i]) << "</text>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
    << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[k].points) o << px(x) << ',' << py(y) << ' ';
    o << "\"/>\n";
    for (const auto& [x, y] : series[k].points)
      o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[k].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::filesystem::path> render_curve_charts(const std::vector<CurveSummary>& summary,
                                                       const std::filesystem::path& out_dir) {
  std::vector<std::string> courses;
  for (const auto& s : summary) push_unique(courses, s.course);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& course : courses) {
    std::vector<std::size_t> sizes;
    std::vector<std::string> models;
    for (const auto& s : summary)
      if (s.course == course) {
        push_unique(sizes, s.pilot_size);
        push_unique(models, s.model);
      }
    std::sort(sizes.begin(), sizes.end());
    std::vector<std::string> ticks;
    for (auto n : sizes) ticks.push_back(std::to_string(n));
    for (const std::string metric : {"acc", "auc"}) {
      std::vector<Series> series;
      for (const auto& md : models) {
        Series se{md, {}};
        for (const auto& s : summary)
          if (s.course == course && s.model == md) {
            const auto idx = std::find(sizes.begin(), sizes.end(), s.pilot_size) - sizes.begin();
            se.points.emplace_back(static_cast<double>(idx), 100.0 * (metric == "acc" ? s.acc : s.auc));
          }
        std::sort(se.points.begin(), se.points.end());
        series.push_back(std::move(se));
      }
      const std::string upper = metric == "acc" ? "ACC" : "AUC";
      const auto path = out_dir / ("curve_" + course + "_" + metric + ".svg");
      std::ofstream out(path);
      if (!out) throw IoError("cannot write " + path.string());
      out << line_chart_svg(course + ": " + upper + " vs. pilot students", "pilot students", upper + " (%)", ticks,
                            series);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace ktransfer
