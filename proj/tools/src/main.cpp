#include "velander_app/app.hpp"

int main(int argc, char** argv) { return velander::app::run(argc, argv); }
