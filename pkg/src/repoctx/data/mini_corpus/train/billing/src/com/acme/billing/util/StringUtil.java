package com.acme.billing.util;

public final class StringUtil {
    private StringUtil() {
    }

    public static String trimToEmpty(String s) {
        return s == null ? "" : s.trim();
    }

    public static String money(double amount, String currency) {
        return String.format("%.2f %s", amount, currency);
    }
}
