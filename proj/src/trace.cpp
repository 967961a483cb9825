#include "mdfo/trace.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace mdfo {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void append_opt(std::string& out, const std::optional<double>& v) {
  out.push_back(',');
  if (v.has_value()) out += format_double(*v);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw std::invalid_argument("trace: bad number '" + s + "'");
  return v;
}

}  // namespace

std::string trace_to_csv(const RunTrace& trace) {
  std::string out = "iter,evals,f,grad_norm,learner_loss,proj_residual,wall_ms\n";
  for (const TraceRow& row : trace.rows) {
    out += std::to_string(row.iter);
    out.push_back(',');
    out += std::to_string(row.evals);
    out.push_back(',');
    out += format_double(row.f);
    out.push_back(',');
    out += format_double(row.grad_norm);
    append_opt(out, row.learner_loss);
    append_opt(out, row.proj_residual);
    append_opt(out, row.wall_ms);
    out.push_back('\n');
  }
  return out;
}

std::string learner_trace_to_csv(const RunTrace& trace) {
  std::string out =
      "iteration,buffer_size,mean_loss_before,mean_loss_after,reinit_flag,resolve_flag\n";
  for (const LearnerTraceRow& row : trace.learner_rows) {
    out += std::to_string(row.iteration);
    out.push_back(',');
    out += std::to_string(row.buffer_size);
    out.push_back(',');
    out += format_double(row.mean_loss_before);
    out.push_back(',');
    out += format_double(row.mean_loss_after);
    out.push_back(',');
    out += row.reinit_flag ? '1' : '0';
    out.push_back(',');
    out += row.resolve_flag ? '1' : '0';
    out.push_back('\n');
  }
  return out;
}

RunTrace trace_from_csv(const std::string& text) {
  RunTrace trace;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line.rfind("iter,", 0) != 0) throw std::invalid_argument("trace: bad header");
      header = false;
      continue;
    }
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != 7) throw std::invalid_argument("trace: expected 7 columns");
    TraceRow row;
    row.iter = std::stol(fields[0]);
    row.evals = std::stol(fields[1]);
    row.f = parse_double(fields[2]);
    row.grad_norm = parse_double(fields[3]);
    if (!fields[4].empty()) row.learner_loss = parse_double(fields[4]);
    if (!fields[5].empty()) row.proj_residual = parse_double(fields[5]);
    if (!fields[6].empty()) row.wall_ms = parse_double(fields[6]);
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace mdfo
