mod common;

use std::fs;

use common::fixture;
use uwqa_core::{decode_image, Error, ImageBuffer};

#[test]
fn png_pixels_decode_exactly() {
    let img = decode_image(&fs::read(fixture("tiny_2x2.png")).unwrap()).unwrap();
    assert_eq!((img.width(), img.height()), (2, 2));
    assert_eq!(img.pixels(), &[[10, 20, 30], [40, 50, 60], [70, 80, 90], [250, 251, 252]]);
}

#[test]
fn alpha_is_dropped() {
    let img = decode_image(&fs::read(fixture("rgba_2x1.png")).unwrap()).unwrap();
    assert_eq!(img.pixels(), &[[1, 2, 3], [4, 5, 6]]);
}

#[test]
fn sixteen_bit_png_is_reduced_to_eight_bits() {
    let mut buf = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::new(2, 1);
    buf.put_pixel(0, 0, image::Rgb([0x1234, 0xff00, 0x00ff]));
    buf.put_pixel(1, 0, image::Rgb([65535, 256, 0]));
    let mut bytes = Vec::new();
    image::DynamicImage::ImageRgb16(buf)
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .unwrap();
    let img = decode_image(&bytes).unwrap();
    assert_eq!(img.pixels(), &[[0x12, 0xff, 0x00], [255, 1, 0]]);
}

#[test]
fn png_round_trip() {
    let img = ImageBuffer::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 50) as u8, 99]).unwrap();
    assert_eq!(decode_image(&img.to_png().unwrap()).unwrap(), img);
}

#[test]
fn garbage_and_truncated_input_fail_cleanly() {
    assert!(matches!(decode_image(b"definitely not an image"), Err(Error::Decode(_))));
    let png = fs::read(fixture("tiny_2x2.png")).unwrap();
    assert!(matches!(decode_image(&png[..png.len() / 2]), Err(Error::Decode(_))));
    assert!(matches!(decode_image(&[]), Err(Error::Decode(_))));
}
