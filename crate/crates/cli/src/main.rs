fn main() {
    println!("melai");
}
