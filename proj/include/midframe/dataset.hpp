#pragma once

#include <string>
#include <vector>

#include "midframe/errors.hpp"

namespace midframe {

struct TripletRecord {
  std::string frame0;
  std::string gt;
  std::string frame1;
  std::string id;
};

enum class DatasetLayout { TripletDirs, VimeoList, MiddleburyOther };

struct DatasetLoadResult {
  std::vector<TripletRecord> records;
  std::vector<std::string> warnings;  // malformed entries, skipped
};

// triplet-dirs: subdirectories holding frame0/gt/frame1.png or im1/im2/im3.png.
// vimeo-list: root/tri_testlist.txt lines "xxxxx/yyyy" resolving to
//             root/sequences/<line>/im{1,2,3}.png.
// middlebury-other: scene directories with frame10.png/frame10i11.png/frame11.png,
//                   scenes without the ground-truth middle frame are skipped.
DatasetLoadResult load_dataset(const std::string& root, DatasetLayout layout);

DatasetLayout parse_layout(const std::string& name);

}  // namespace midframe
