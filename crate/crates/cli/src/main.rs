fn main() {
    eprintln!("qpb: not yet wired up");
    std::process::exit(2);
}
