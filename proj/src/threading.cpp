#include "scott/threading.hpp"

#include <Eigen/Core>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "scott/errors.hpp"

namespace scott {

void set_num_threads(int n) {
  if (n < 1) n = 1;
  Eigen::setNbThreads(n);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int num_threads() { return Eigen::nbThreads(); }

AsyncLineWriter::AsyncLineWriter(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc), queue_(1024) {
  if (!out_) throw DataError("cannot open '" + path + "' for writing");
  worker_ = std::thread([this] {
    while (auto line = queue_.pop()) {
      out_ << *line << '\n';
    }
    out_.flush();
  });
}

AsyncLineWriter::~AsyncLineWriter() { close(); }

void AsyncLineWriter::write(std::string line) { queue_.push(std::move(line)); }

void AsyncLineWriter::close() {
  if (closed_) return;
  closed_ = true;
  queue_.close();
  if (worker_.joinable()) worker_.join();
}

}  // namespace scott
