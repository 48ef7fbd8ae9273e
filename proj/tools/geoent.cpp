#include <clocale>

#include "cli/app.hpp"

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  return geoent::cli::run(argc, argv);
}
