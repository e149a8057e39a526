#pragma once

// Published obstruction counts with the F values printed next to them.

#include <array>
#include <cstddef>

namespace rapforge::testing {

struct CountRow {
  const char* label;
  std::size_t tp, fp, gt;
  double f;
};

// Attack method comparison on the two datasets (S3FD).
inline constexpr std::array<CountRow, 6> kMethodTable{{
    {"CGB Dpatch", 2977, 0, 3000, 0.996},
    {"CGB Lee", 2967, 38235, 3000, 0.134},
    {"CGB Proposed", 1967, 7, 3000, 0.791},
    {"FFP Dpatch", 3305, 617, 3315, 0.913},
    {"FFP Lee", 3287, 26866, 3315, 0.196},
    {"FFP Proposed", 3227, 56, 3315, 0.978},
}};

// Transfer across train/test datasets and detectors.
inline constexpr std::array<CountRow, 12> kTransferTable{{
    {"CGB/CGB MTCNN", 513, 0, 3000, 0.292},
    {"CGB/CGB S3FD", 1967, 7, 3000, 0.791},
    {"CGB/CGB RetinaFace", 1947, 0, 3000, 0.787},
    {"CGB/FFP MTCNN", 3135, 407, 3315, 0.914},
    {"CGB/FFP S3FD", 3226, 58, 3315, 0.978},
    {"CGB/FFP RetinaFace", 3147, 10, 3315, 0.972},
    {"FFP/FFP MTCNN", 3132, 371, 3315, 0.918},
    {"FFP/FFP S3FD", 3227, 56, 3315, 0.978},
    {"FFP/FFP RetinaFace", 3147, 10, 3315, 0.972},
    {"FFP/CGB MTCNN", 512, 0, 3000, 0.292},
    {"FFP/CGB S3FD", 1993, 10, 3000, 0.797},
    {"FFP/CGB RetinaFace", 1968, 1, 3000, 0.792},
}};

}  // namespace rapforge::testing
