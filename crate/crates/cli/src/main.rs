fn main() {
    println!("ktree");
}
