#ifndef MDFO_TRACE_HPP
#define MDFO_TRACE_HPP

#include <optional>
#include <string>
#include <vector>

namespace mdfo {

/// One optimizer iteration. Row 0 is the starting point (zero budget
/// evaluations; its f comes from one probe evaluation charged to the
/// metrics counter, not the optimization budget).
struct TraceRow {
  long iter = 0;
  long evals = 0;  // cumulative budget evaluations
  double f = 0.0;
  double grad_norm = 0.0;
  std::optional<double> learner_loss;
  std::optional<double> proj_residual;
  std::optional<double> wall_ms;
};

struct LearnerTraceRow {
  long iteration = 0;
  std::size_t buffer_size = 0;
  double mean_loss_before = 0.0;
  double mean_loss_after = 0.0;
  bool reinit_flag = false;
  bool resolve_flag = false;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<LearnerTraceRow> learner_rows;
};

/// Shortest decimal rendering that round-trips to the same double.
std::string format_double(double v);

/// Header: iter,evals,f,grad_norm,learner_loss,proj_residual,wall_ms
/// Optional cells are empty when absent.
std::string trace_to_csv(const RunTrace& trace);

/// Header: iteration,buffer_size,mean_loss_before,mean_loss_after,reinit_flag,resolve_flag
std::string learner_trace_to_csv(const RunTrace& trace);

/// Parses trace_to_csv output (the fields analysis tools need).
RunTrace trace_from_csv(const std::string& text);

}  // namespace mdfo

#endif  // MDFO_TRACE_HPP
