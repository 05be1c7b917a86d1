//! Canonical byte encoding shared by signatures, certificates, transactions
//! and blocks.
//!
//! Every field is written as a 4-byte big-endian length followed by the field
//! bytes, in declared order. Integers are 8-byte big-endian, booleans and tags
//! a single byte. Composite values nest: the field bytes of a struct or list
//! are themselves a sequence of length-prefixed fields, so a decoder can
//! always skip or bound a field without knowing its type.

use thiserror::Error;

/// Failure to decode canonical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input truncated: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("field has length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("field is not valid UTF-8")]
    Utf8,
    #[error("{0} trailing bytes after last field")]
    TrailingBytes(usize),
    #[error("unknown tag {tag} for {what}")]
    BadTag { what: &'static str, tag: u8 },
}

/// Types with a single canonical byte form.
pub trait Canonical: Sized {
    fn encode(&self, enc: &mut Encoder);
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError>;

    fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        enc.finish()
    }

    /// Decodes a value that must consume `bytes` exactly.
    fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut dec = Decoder::new(bytes);
        let value = Self::decode(&mut dec)?;
        dec.finish()?;
        Ok(value)
    }
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, data: &[u8]) -> &mut Self {
        let len = u32::try_from(data.len()).expect("canonical field exceeds 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(data);
        self
    }

    pub fn u64(&mut self, value: u64) -> &mut Self {
        self.bytes(&value.to_be_bytes())
    }

    pub fn u8(&mut self, value: u8) -> &mut Self {
        self.bytes(&[value])
    }

    pub fn bool(&mut self, value: bool) -> &mut Self {
        self.u8(u8::from(value))
    }

    pub fn str(&mut self, value: &str) -> &mut Self {
        self.bytes(value.as_bytes())
    }

    /// Writes a composite field built by `build`.
    pub fn nested(&mut self, build: impl FnOnce(&mut Encoder)) -> &mut Self {
        let mut inner = Encoder::new();
        build(&mut inner);
        self.bytes(&inner.buf)
    }

    pub fn value<T: Canonical>(&mut self, value: &T) -> &mut Self {
        self.nested(|e| value.encode(e))
    }

    pub fn list<T: Canonical>(&mut self, items: &[T]) -> &mut Self {
        self.nested(|e| {
            for item in items {
                e.value(item);
            }
        })
    }

    /// `None` is a single zero tag; `Some(v)` is tag 1 followed by `v`.
    pub fn option<T>(&mut self, value: Option<&T>, put: impl FnOnce(&mut Encoder, &T)) -> &mut Self {
        self.nested(|e| match value {
            None => {
                e.u8(0);
            }
            Some(v) => {
                e.u8(1);
                put(e, v);
            }
        })
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { rest: bytes }
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.rest.len() < n {
            return Err(CodecError::Truncated {
                needed: n,
                available: self.rest.len(),
            });
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.take(4)?;
        let len = u32::from_be_bytes([len[0], len[1], len[2], len[3]]) as usize;
        self.take(len)
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let raw = self.bytes()?;
        raw.try_into().map_err(|_| CodecError::BadLength {
            expected: N,
            got: raw.len(),
        })
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.fixed::<8>()?))
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.fixed::<1>()?[0])
    }

    pub fn bool(&mut self) -> Result<bool, CodecError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(CodecError::BadTag { what: "bool", tag }),
        }
    }

    pub fn string(&mut self) -> Result<String, CodecError> {
        let raw = self.bytes()?;
        String::from_utf8(raw.to_vec()).map_err(|_| CodecError::Utf8)
    }

    pub fn nested(&mut self) -> Result<Decoder<'a>, CodecError> {
        Ok(Decoder::new(self.bytes()?))
    }

    pub fn value<T: Canonical>(&mut self) -> Result<T, CodecError> {
        let mut inner = self.nested()?;
        let value = T::decode(&mut inner)?;
        inner.finish()?;
        Ok(value)
    }

    pub fn list<T: Canonical>(&mut self) -> Result<Vec<T>, CodecError> {
        let mut inner = self.nested()?;
        let mut items = Vec::new();
        while !inner.is_empty() {
            items.push(inner.value()?);
        }
        Ok(items)
    }

    pub fn option<T>(
        &mut self,
        get: impl FnOnce(&mut Decoder<'a>) -> Result<T, CodecError>,
    ) -> Result<Option<T>, CodecError> {
        let mut inner = self.nested()?;
        let value = match inner.u8()? {
            0 => None,
            1 => Some(get(&mut inner)?),
            tag => return Err(CodecError::BadTag { what: "option", tag }),
        };
        inner.finish()?;
        Ok(value)
    }

    pub fn finish(self) -> Result<(), CodecError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(CodecError::TrailingBytes(self.rest.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_layout_is_length_prefixed_big_endian() {
        let mut enc = Encoder::new();
        enc.u64(258).str("ab");
        assert_eq!(
            enc.finish(),
            vec![0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 1, 2, 0, 0, 0, 2, b'a', b'b']
        );
    }

    #[test]
    fn truncated_input_is_reported() {
        let mut dec = Decoder::new(&[0, 0, 0, 5, 1, 2]);
        assert_eq!(
            dec.bytes(),
            Err(CodecError::Truncated { needed: 5, available: 2 })
        );
    }

    #[test]
    fn bad_bool_tag() {
        let mut enc = Encoder::new();
        enc.u8(7);
        let bytes = enc.finish();
        assert!(matches!(
            Decoder::new(&bytes).bool(),
            Err(CodecError::BadTag { tag: 7, .. })
        ));
    }

    proptest! {
        #[test]
        fn mixed_fields_decode_back(a in any::<u64>(), s in ".{0,40}", opt in proptest::option::of(any::<u64>())) {
            let mut enc = Encoder::new();
            enc.u64(a).str(&s).option(opt.as_ref(), |e, v| { e.u64(*v); });
            let bytes = enc.finish();
            let mut dec = Decoder::new(&bytes);
            prop_assert_eq!(dec.u64().unwrap(), a);
            prop_assert_eq!(dec.string().unwrap(), s);
            prop_assert_eq!(dec.option(|d| d.u64()).unwrap(), opt);
            prop_assert!(dec.finish().is_ok());
        }
    }
}
