#pragma once

#include <string>
#include <vector>

namespace pointe {

struct GradSuiteEntry {
  std::string name;
  bool primitive = false;  // true for single-op checks
  double max_rel_error = 0.0;
  double tol = 1e-4;
  bool passed = false;
};

// Finite-difference verification of every autodiff primitive (randomized
// trials per op) plus the composite spatial-encoding -> adaptive
// aggregation -> cross-entropy graph, the distance-focal loss graph, and a
// full tiny-classifier forward. `corrupt_op`, when set, injects a value
// perturbation invisible to the analytic gradient into the named entry so
// harness failures stay detectable.
std::vector<GradSuiteEntry> run_gradcheck_suite(const std::string& corrupt_op = "");

bool gradcheck_suite_passed(const std::vector<GradSuiteEntry>& entries);

}  // namespace pointe
