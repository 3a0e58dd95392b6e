#include "fedback/trace.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

constexpr std::array<std::string_view, 10> kFixedColumns = {
    "round",   "selected_count", "cumulative_events", "omega_norm", "grad_norm_global",
    "lagrangian", "F_theta",     "f_omega",           "loss_gap",   "selected"};
constexpr std::array<std::string_view, 4> kClientColumns = {"S_", "L_", "delta_", "dist_"};

void put_double(std::ostream& out, double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  out.write(buf.data(), res.ptr - buf.data());
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

class RowParser {
 public:
  RowParser(std::size_t row, const std::vector<std::string>& header) : row_(row), header_(header) {}

  template <typename T>
  T number(std::string_view text, std::size_t column) const {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
      fail("cannot parse '" + std::string(text) + "'", column);
    }
    return value;
  }

  [[noreturn]] void fail(const std::string& why, std::size_t column) const {
    const std::string& field = column < header_.size() ? header_[column] : std::string("?");
    throw ParseError("trace row " + std::to_string(row_) + ", field '" + field + "': " + why, row_, field);
  }

 private:
  std::size_t row_;
  const std::vector<std::string>& header_;
};

}  // namespace

void emit_trace(const Trace& trace, std::ostream& out, bool per_client_columns) {
  const std::size_t clients =
      per_client_columns && !trace.empty() ? trace.front().per_client.size() : 0;
  for (std::size_t c = 0; c < kFixedColumns.size(); ++c) {
    out << (c ? "," : "") << kFixedColumns[c];
  }
  for (std::size_t i = 0; i < clients; ++i) {
    for (auto prefix : kClientColumns) out << ',' << prefix << i;
  }
  out << '\n';

  for (const RoundTrace& r : trace) {
    if (r.per_client.size() != clients && clients != 0) {
      throw ContractViolation("trace rows carry different numbers of per-client records");
    }
    out << r.round << ',' << r.selected_count << ',' << r.cumulative_events << ',';
    put_double(out, r.omega_norm);
    out << ',';
    put_double(out, r.grad_norm_global);
    out << ',';
    put_double(out, r.lagrangian);
    out << ',';
    put_double(out, r.F_theta);
    out << ',';
    put_double(out, r.f_omega);
    out << ',';
    if (r.loss_gap) put_double(out, *r.loss_gap);
    out << ',';
    for (std::size_t j = 0; j < r.selected.size(); ++j) out << (j ? ";" : "") << r.selected[j];
    for (std::size_t i = 0; i < clients; ++i) {
      const ClientRecord& c = r.per_client[i];
      out << ',' << static_cast<int>(c.event) << ',';
      put_double(out, c.load);
      out << ',';
      put_double(out, c.delta);
      out << ',';
      put_double(out, c.distance);
    }
    out << '\n';
  }
}

void emit_trace(const Trace& trace, const std::filesystem::path& path, bool per_client_columns) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing", 0, "");
  emit_trace(trace, out, per_client_columns);
  if (!out) throw ParseError("write to " + path.string() + " failed", 0, "");
}

Trace load_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace is empty: missing header", 1, "");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  for (auto f : split(line, ',')) header.emplace_back(f);
  if (header.size() < kFixedColumns.size() ||
      (header.size() - kFixedColumns.size()) % kClientColumns.size() != 0) {
    throw ParseError("trace header has " + std::to_string(header.size()) + " columns", 1, "");
  }
  for (std::size_t c = 0; c < kFixedColumns.size(); ++c) {
    if (header[c] != kFixedColumns[c]) {
      throw ParseError("trace header column " + std::to_string(c) + " should be '" +
                           std::string(kFixedColumns[c]) + "'",
                       1, header[c]);
    }
  }
  const std::size_t clients = (header.size() - kFixedColumns.size()) / kClientColumns.size();
  for (std::size_t i = 0; i < clients; ++i) {
    for (std::size_t q = 0; q < kClientColumns.size(); ++q) {
      const std::string expected = std::string(kClientColumns[q]) + std::to_string(i);
      const std::string& got = header[kFixedColumns.size() + i * kClientColumns.size() + q];
      if (got != expected) {
        throw ParseError("trace header expects '" + expected + "'", 1, got);
      }
    }
  }

  Trace trace;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const RowParser p(row, header);
    if (fields.size() != header.size()) {
      p.fail("row has " + std::to_string(fields.size()) + " fields, header has " +
                 std::to_string(header.size()),
             std::min(fields.size(), header.size() - 1));
    }
    RoundTrace r;
    r.round = p.number<std::int64_t>(fields[0], 0);
    r.selected_count = p.number<std::size_t>(fields[1], 1);
    r.cumulative_events = p.number<std::int64_t>(fields[2], 2);
    r.omega_norm = p.number<double>(fields[3], 3);
    r.grad_norm_global = p.number<double>(fields[4], 4);
    r.lagrangian = p.number<double>(fields[5], 5);
    r.F_theta = p.number<double>(fields[6], 6);
    r.f_omega = p.number<double>(fields[7], 7);
    if (!fields[8].empty()) r.loss_gap = p.number<double>(fields[8], 8);
    if (!fields[9].empty()) {
      for (auto idx : split(fields[9], ';')) r.selected.push_back(p.number<std::size_t>(idx, 9));
    }
    if (r.selected.size() != r.selected_count) {
      p.fail("selected list has " + std::to_string(r.selected.size()) + " entries", 9);
    }
    r.per_client.resize(clients);
    for (std::size_t i = 0; i < clients; ++i) {
      const std::size_t base = kFixedColumns.size() + i * kClientColumns.size();
      const int event = p.number<int>(fields[base], base);
      if (event != 0 && event != 1) p.fail("event must be 0 or 1", base);
      r.per_client[i] = {static_cast<std::uint8_t>(event), p.number<double>(fields[base + 1], base + 1),
                         p.number<double>(fields[base + 2], base + 2),
                         p.number<double>(fields[base + 3], base + 3)};
    }
    trace.push_back(std::move(r));
  }
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace " + path.string(), 0, "");
  return load_trace(in);
}

}  // namespace fedback
