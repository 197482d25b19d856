package com.acme.billing;

import com.acme.billing.util.*;

public class Invoice extends BaseEntity {
    private final Account account;
    private final double amount;
    private String currency = "EUR";

    public Invoice(Account account, double amount) {
        this.account = account;
        this.amount = amount;
    }

    public double getAmount() {
        return amount;
    }

    public String describe() {
        return account.getOwner() + ": " + StringUtil.money(amount, currency) + " due " + Dates.today();
    }
}
