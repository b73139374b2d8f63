#include "midframe/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace midframe {

namespace {

bool path_exists(const fs::path& p) {
  std::error_code ec;
  return fs::exists(p, ec);
}

DatasetLoadResult load_triplet_dirs(const fs::path& root) {
  DatasetLoadResult out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& d : dirs) {
    TripletRecord rec;
    rec.id = d.filename().string();
    if (path_exists(d / "frame0.png") && path_exists(d / "gt.png") && path_exists(d / "frame1.png")) {
      rec.frame0 = (d / "frame0.png").string();
      rec.gt = (d / "gt.png").string();
      rec.frame1 = (d / "frame1.png").string();
    } else if (path_exists(d / "im1.png") && path_exists(d / "im2.png") && path_exists(d / "im3.png")) {
      rec.frame0 = (d / "im1.png").string();
      rec.gt = (d / "im2.png").string();
      rec.frame1 = (d / "im3.png").string();
    } else {
      out.warnings.push_back("skipping " + d.string() + ": no recognized triplet files");
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

DatasetLoadResult load_vimeo_list(const fs::path& root) {
  DatasetLoadResult out;
  const fs::path list = root / "tri_testlist.txt";
  std::ifstream in(list);
  if (!in) throw IoError("cannot open " + list.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                             line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;
    const fs::path seq = root / "sequences" / line;
    if (line.find('/') == std::string::npos || !path_exists(seq / "im1.png") ||
        !path_exists(seq / "im2.png") || !path_exists(seq / "im3.png")) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": bad entry '" +
                             line + "'");
      continue;
    }
    TripletRecord rec;
    rec.id = line;
    rec.frame0 = (seq / "im1.png").string();
    rec.gt = (seq / "im2.png").string();
    rec.frame1 = (seq / "im3.png").string();
    out.records.push_back(std::move(rec));
  }
  return out;
}

DatasetLoadResult load_middlebury_other(const fs::path& root) {
  DatasetLoadResult out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& d : dirs) {
    if (!path_exists(d / "frame10.png") || !path_exists(d / "frame11.png")) {
      out.warnings.push_back("skipping " + d.string() + ": missing input frames");
      continue;
    }
    if (!path_exists(d / "frame10i11.png")) continue;  // no ground truth for this scene
    TripletRecord rec;
    rec.id = d.filename().string();
    rec.frame0 = (d / "frame10.png").string();
    rec.gt = (d / "frame10i11.png").string();
    rec.frame1 = (d / "frame11.png").string();
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

DatasetLoadResult load_dataset(const std::string& root, DatasetLayout layout) {
  const fs::path root_path(root);
  if (!path_exists(root_path)) throw IoError("dataset root does not exist: " + root);
  switch (layout) {
    case DatasetLayout::TripletDirs:
      return load_triplet_dirs(root_path);
    case DatasetLayout::VimeoList:
      return load_vimeo_list(root_path);
    case DatasetLayout::MiddleburyOther:
      return load_middlebury_other(root_path);
  }
  throw DataError("unknown dataset layout");
}

DatasetLayout parse_layout(const std::string& name) {
  if (name == "triplet-dirs") return DatasetLayout::TripletDirs;
  if (name == "vimeo-list") return DatasetLayout::VimeoList;
  if (name == "middlebury-other") return DatasetLayout::MiddleburyOther;
  throw DataError("unknown dataset layout: " + name);
}

}  // namespace midframe
