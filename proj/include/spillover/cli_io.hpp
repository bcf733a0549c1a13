#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/local_poly.hpp"

namespace spillover {

/// Reads the wide CSV schema
///   group_id, y0, y1, d0, d1, z0_1..z0_k, z1_1..z1_k, x0_1..x0_m, x1_1..x1_m
/// Lines starting with '#' are comments. The result has passed validate_dataset.
Dataset load_dataset_csv(const std::string& path);
Dataset read_dataset_csv(std::istream& in, const std::string& source = "<stream>");

/// Writes the same schema with shortest round-trip float formatting. Each
/// entry of `comments` becomes one "# ..." line ahead of the header row.
void write_dataset_csv(std::ostream& os, const Dataset& data, const std::vector<std::string>& comments = {});

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

/// "a:b:n" -> n equispaced values from a to b inclusive; "a" -> {a}.
std::vector<double> parse_grid(const std::string& spec);
/// Tensor grid in (own, peer) order, own coordinate varying slowest.
std::vector<Point2> tensor_grid(const std::vector<double>& own, const std::vector<double>& peer);

/// Exit status of an exception thrown by the library: 2 config, 3 data, 4 numerical, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Command-line entry point. argv[1] names the subcommand. Errors are written
/// to `err` as one JSON object per line.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spillover
