#pragma once

#include <string>

#include "pointe/error.hpp"

namespace pointe {

enum class Task { classify, segment, scene_seg };

inline const char* task_name(Task t) {
  switch (t) {
    case Task::classify: return "classify";
    case Task::segment: return "segment";
    case Task::scene_seg: return "scene_seg";
  }
  return "unknown";
}

inline Task task_from_name(const std::string& s) {
  if (s == "classify") return Task::classify;
  if (s == "segment") return Task::segment;
  if (s == "scene_seg") return Task::scene_seg;
  throw Error(ErrorCode::ConfigError, "unknown task '" + s + "'");
}

}  // namespace pointe
