package com.acme.billing.util;

import java.time.LocalDate;

public final class Dates {
    private Dates() {
    }

    public static String today() {
        return LocalDate.now().toString();
    }
}
